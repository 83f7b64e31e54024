//! Clipped-surrogate loss, its gradient and the minibatch update.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PpoError, Result};
use crate::optim::{clip_grad_norm, Adam};
use crate::policy::{gaussian_entropy, gaussian_log_prob, Policy, LOG_STD_MAX, LOG_STD_MIN};

/// Rows per gradient work item. Fixed so sums are independent of workers.
const GRAD_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    /// Control steps collected per environment per iteration.
    pub horizon: usize,
    /// Collect-and-update cycles.
    pub iterations: usize,
    pub minibatches: usize,
    pub update_epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            horizon: 64,
            iterations: 1000,
            minibatches: 4,
            update_epochs: 4,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.005,
            learning_rate: 3e-4,
            max_grad_norm: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.into()));
        if self.horizon == 0 || self.minibatches == 0 || self.update_epochs == 0 {
            return bad("horizon, minibatches and update_epochs must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0 && self.learning_rate > 0.0 && self.max_grad_norm > 0.0) {
            return bad("clip, learning_rate and max_grad_norm must be > 0");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return bad("value_coef and entropy_coef must be >= 0");
        }
        Ok(())
    }

    pub fn coefs(&self) -> LossCoefs {
        LossCoefs { clip: self.clip, value_coef: self.value_coef, entropy_coef: self.entropy_coef }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossCoefs {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Training samples, row-major.
#[derive(Clone, Copy, Debug)]
pub struct Minibatch<'a> {
    pub obs: &'a [f64],
    pub actions: &'a [f64],
    pub old_log_prob: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

impl Minibatch<'_> {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossStats {
    /// `policy + value_coef * value - entropy_coef * entropy`.
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)` and whether the
/// unclipped branch is the one selected.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

struct Partial {
    policy: f64,
    value: f64,
    kl: f64,
    clipped: usize,
    grad: Vec<f64>,
}

/// Mean loss over the minibatch and its gradient with respect to every
/// parameter.
pub fn loss_and_grad(policy: &Policy, mb: &Minibatch<'_>, coefs: &LossCoefs) -> Result<(LossStats, Vec<f64>)> {
    let n = mb.len();
    let (od, ad) = (policy.obs_dim(), policy.action_dim());
    if n == 0 || mb.obs.len() != n * od || mb.actions.len() != n * ad || mb.old_log_prob.len() != n || mb.returns.len() != n
    {
        return Err(PpoError::ShapeMismatch { expected: n * od, got: mb.obs.len() });
    }
    let inv_n = 1.0 / n as f64;
    let ls_off = policy.log_std_offset();
    let chunks: Vec<usize> = (0..n).step_by(GRAD_CHUNK).collect();
    let partials: Vec<Partial> = chunks
        .par_iter()
        .map(|&start| -> Result<Partial> {
            let end = (start + GRAD_CHUNK).min(n);
            let b = end - start;
            let (out, cache) = policy.forward_cached(&mb.obs[start * od..end * od], b)?;
            let sigma2: Vec<f64> = out.log_std.iter().map(|s| (2.0 * s).exp()).collect();
            let mut grad = vec![0.0; policy.n_params()];
            let mut dmean = vec![0.0; b * ad];
            let mut dvalue = vec![0.0; b];
            let mut part = Partial { policy: 0.0, value: 0.0, kl: 0.0, clipped: 0, grad: Vec::new() };
            for i in 0..b {
                let k = start + i;
                let a = &mb.actions[k * ad..(k + 1) * ad];
                let mu = &out.mean[i * ad..(i + 1) * ad];
                let logp = gaussian_log_prob(a, mu, &out.log_std);
                let log_ratio = logp - mb.old_log_prob[k];
                let ratio = log_ratio.exp();
                let adv = mb.advantages[k];
                let (surr, unclipped) = clipped_surrogate(ratio, adv, coefs.clip);
                part.policy -= surr;
                part.kl += (ratio - 1.0) - log_ratio;
                part.clipped += usize::from((ratio - 1.0).abs() > coefs.clip);
                let dlogp = if unclipped { -ratio * adv * inv_n } else { 0.0 };
                for d in 0..ad {
                    let diff = a[d] - mu[d];
                    dmean[i * ad + d] = dlogp * diff / sigma2[d];
                    grad[ls_off + d] += dlogp * (diff * diff / sigma2[d] - 1.0);
                }
                let err = out.value[i] - mb.returns[k];
                part.value += err * err;
                dvalue[i] = coefs.value_coef * 2.0 * err * inv_n;
            }
            policy.backward(&cache, dmean, dvalue, &mut grad);
            part.grad = grad;
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let mut grad = vec![0.0; policy.n_params()];
    let (mut pol, mut val, mut kl, mut clipped) = (0.0, 0.0, 0.0, 0);
    for p in partials {
        pol += p.policy;
        val += p.value;
        kl += p.kl;
        clipped += p.clipped;
        grad.iter_mut().zip(&p.grad).for_each(|(g, x)| *g += x);
    }
    let log_std = policy.log_std();
    let entropy = gaussian_entropy(&log_std);
    for d in 0..ad {
        let raw = policy.params[ls_off + d];
        grad[ls_off + d] -= coefs.entropy_coef;
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
            grad[ls_off + d] = 0.0;
        }
    }
    let (pol, val) = (pol * inv_n, val * inv_n);
    let stats = LossStats {
        total: pol + coefs.value_coef * val - coefs.entropy_coef * entropy,
        policy: pol,
        value: val,
        entropy,
        approx_kl: kl * inv_n,
        clip_fraction: clipped as f64 * inv_n,
    };
    Ok((stats, grad))
}

/// Flat rollout samples gathered for an update.
#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_prob: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Mean gradient norm before clipping.
    pub grad_norm: f64,
}

/// Normalizes advantages to zero mean and unit standard deviation.
pub fn normalize(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
}

/// Runs `update_epochs` passes of shuffled minibatches over `samples`.
pub fn ppo_update(
    policy: &mut Policy,
    opt: &mut Adam,
    samples: &Samples,
    cfg: &PpoConfig,
    rng: &mut ChaCha12Rng,
    iteration: usize,
) -> Result<UpdateStats> {
    let n = samples.advantages.len();
    let (od, ad) = (policy.obs_dim(), policy.action_dim());
    let mut adv = samples.advantages.clone();
    normalize(&mut adv);
    let mb_size = n.div_ceil(cfg.minibatches);
    let mut order: Vec<usize> = (0..n).collect();
    let mut acc = UpdateStats::default();
    let mut count = 0.0;
    let mut mb = Samples::default();
    for _ in 0..cfg.update_epochs {
        order.shuffle(rng);
        for idx in order.chunks(mb_size) {
            mb.obs.clear();
            mb.actions.clear();
            mb.log_prob.clear();
            mb.advantages.clear();
            mb.returns.clear();
            for &k in idx {
                mb.obs.extend_from_slice(&samples.obs[k * od..(k + 1) * od]);
                mb.actions.extend_from_slice(&samples.actions[k * ad..(k + 1) * ad]);
                mb.log_prob.push(samples.log_prob[k]);
                mb.advantages.push(adv[k]);
                mb.returns.push(samples.returns[k]);
            }
            let batch = Minibatch {
                obs: &mb.obs,
                actions: &mb.actions,
                old_log_prob: &mb.log_prob,
                advantages: &mb.advantages,
                returns: &mb.returns,
            };
            let (stats, mut grad) = loss_and_grad(policy, &batch, &cfg.coefs())?;
            if !stats.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PpoError::NonFiniteLoss {
                    iteration,
                    detail: format!(
                        "policy {} value {} entropy {} kl {}",
                        stats.policy, stats.value, stats.entropy, stats.approx_kl
                    ),
                });
            }
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(&mut policy.params, &grad);
            acc.policy_loss += stats.policy;
            acc.value_loss += stats.value;
            acc.entropy += stats.entropy;
            acc.approx_kl += stats.approx_kl;
            acc.clip_fraction += stats.clip_fraction;
            acc.grad_norm += norm;
            count += 1.0;
        }
    }
    Ok(UpdateStats {
        policy_loss: acc.policy_loss / count,
        value_loss: acc.value_loss / count,
        entropy: acc.entropy / count,
        approx_kl: acc.approx_kl / count,
        clip_fraction: acc.clip_fraction / count,
        grad_norm: acc.grad_norm / count,
    })
}

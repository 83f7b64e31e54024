//! Rollout collection, the training loop, metric logs and checkpoints.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use wheelsim_core::envs::{EnvConfig, Task, VecEnv};

use crate::error::{PpoError, Result};
use crate::gae::{compute_gae, GaeInput};
use crate::optim::Adam;
use crate::policy::{gaussian_log_prob, NetConfig, ParamBlock, Policy, PolicySpec};
use crate::ppo::{ppo_update, PpoConfig, Samples, UpdateStats};

pub const CHECKPOINT_SCHEMA: &str = "wheelsim.checkpoint/1";
pub const ACTION_DIM: usize = 2;

/// Sampling stream of the action noise, distinct from weight initialization.
const SAMPLING_STREAM: u64 = 1;

/// One line of the metric log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub env_steps: u64,
    /// Episodes that ended during this iteration's rollout.
    pub episodes: usize,
    pub mean_episode_return: Option<f64>,
    pub mean_episode_length: Option<f64>,
    pub mean_step_reward: f64,
    /// Per-step mean of each unweighted reward term.
    pub term_means: BTreeMap<String, f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub action_std: Vec<f64>,
}

/// Policy spec for an environment's observation layout.
pub fn policy_spec(env: &EnvConfig, obs_dim: usize, net: &NetConfig) -> PolicySpec {
    let image = match (&net.encoder, env.task, &env.visual) {
        (Some(_), Task::Visual, Some(v)) => Some([v.camera.rows, v.camera.cols]),
        _ => None,
    };
    PolicySpec { obs_dim, action_dim: ACTION_DIM, image, net: net.clone() }
}

pub struct Trainer {
    env: VecEnv,
    policy: Policy,
    opt: Adam,
    cfg: PpoConfig,
    rng: ChaCha12Rng,
    iteration: usize,
    env_steps: u64,
    obs: Vec<f64>,
}

impl Trainer {
    pub fn new(env_cfg: &EnvConfig, cfg: PpoConfig, net: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let env = VecEnv::new(env_cfg, seed)?;
        let policy = Policy::new(policy_spec(env_cfg, env.obs_dim(), net), seed)?;
        let opt = Adam::new(policy.n_params(), cfg.learning_rate);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(SAMPLING_STREAM);
        let obs = env.observations().concat();
        Ok(Self { env, policy, opt, cfg, rng, iteration: 0, env_steps: 0, obs })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn env_config(&self) -> &EnvConfig {
        self.env.config()
    }

    /// One collect, advantage and update cycle.
    pub fn iterate(&mut self) -> Result<IterationMetrics> {
        let (t_len, n) = (self.cfg.horizon, self.env.num_envs());
        let od = self.env.obs_dim();
        let task = self.env.config().task;
        let n_terms = task.term_names().len();
        let rows = t_len * n;
        let mut s = Samples {
            obs: Vec::with_capacity(rows * od),
            actions: Vec::with_capacity(rows * ACTION_DIM),
            log_prob: Vec::with_capacity(rows),
            ..Default::default()
        };
        let mut rewards = Vec::with_capacity(rows);
        let mut values = Vec::with_capacity(rows);
        let mut terminated = Vec::with_capacity(rows);
        let mut truncated = Vec::with_capacity(rows);
        let mut bootstrap: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut term_sums = vec![0.0; n_terms];
        let (mut ep_returns, mut ep_lengths) = (Vec::new(), Vec::new());

        for t in 0..t_len {
            let out = self.policy.forward(&self.obs, n)?;
            let std: Vec<f64> = out.log_std.iter().map(|s| s.exp()).collect();
            let mut actions = Vec::with_capacity(n);
            for i in 0..n {
                let mu = &out.mean[i * ACTION_DIM..(i + 1) * ACTION_DIM];
                let mut a = [0.0; ACTION_DIM];
                for d in 0..ACTION_DIM {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    a[d] = mu[d] + std[d] * z;
                }
                s.log_prob.push(gaussian_log_prob(&a, mu, &out.log_std));
                s.actions.extend_from_slice(&a);
                actions.push(a);
            }
            s.obs.extend_from_slice(&self.obs);
            values.extend_from_slice(&out.value);
            let results = self.env.step_batch(&actions)?;
            self.obs.clear();
            for (i, r) in results.into_iter().enumerate() {
                rewards.push(r.reward);
                terminated.push(r.terminated);
                truncated.push(r.truncated);
                for (acc, v) in term_sums.iter_mut().zip(&r.info.terms) {
                    *acc += v;
                }
                if let Some(ep) = r.episode {
                    ep_returns.push(ep.total_return);
                    ep_lengths.push(ep.length as f64);
                }
                if let Some(o) = r.terminal_observation {
                    bootstrap.push((t * n + i, o));
                }
                self.obs.extend_from_slice(&r.observation);
            }
        }
        self.env_steps += rows as u64;

        let last = self.policy.forward(&self.obs, n)?.value;
        let mut next_values: Vec<f64> = values[n..].iter().chain(&last).copied().collect();
        if !bootstrap.is_empty() {
            let flat: Vec<f64> = bootstrap.iter().flat_map(|(_, o)| o.iter().copied()).collect();
            let v = self.policy.forward(&flat, bootstrap.len())?.value;
            for ((k, _), v) in bootstrap.iter().zip(v) {
                next_values[*k] = v;
            }
        }

        s.advantages = vec![0.0; rows];
        s.returns = vec![0.0; rows];
        let column = |x: &[f64], i: usize| -> Vec<f64> { (0..t_len).map(|t| x[t * n + i]).collect() };
        let bcolumn = |x: &[bool], i: usize| -> Vec<bool> { (0..t_len).map(|t| x[t * n + i]).collect() };
        for i in 0..n {
            let (r, v, nv) = (column(&rewards, i), column(&values, i), column(&next_values, i));
            let (te, tr) = (bcolumn(&terminated, i), bcolumn(&truncated, i));
            let input = GaeInput { rewards: &r, values: &v, next_values: &nv, terminated: &te, truncated: &tr };
            let (adv, ret) = compute_gae(input, self.cfg.gamma, self.cfg.lambda);
            for t in 0..t_len {
                s.advantages[t * n + i] = adv[t];
                s.returns[t * n + i] = ret[t];
            }
        }

        let up: UpdateStats = ppo_update(&mut self.policy, &mut self.opt, &s, &self.cfg, &mut self.rng, self.iteration + 1)?;
        self.iteration += 1;
        let mean = |x: &[f64]| (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64);
        Ok(IterationMetrics {
            iteration: self.iteration,
            env_steps: self.env_steps,
            episodes: ep_returns.len(),
            mean_episode_return: mean(&ep_returns),
            mean_episode_length: mean(&ep_lengths),
            mean_step_reward: rewards.iter().sum::<f64>() / rows as f64,
            term_means: task
                .term_names()
                .iter()
                .zip(&term_sums)
                .map(|(name, v)| (name.to_string(), v / rows as f64))
                .collect(),
            policy_loss: up.policy_loss,
            value_loss: up.value_loss,
            entropy: up.entropy,
            approx_kl: up.approx_kl,
            clip_fraction: up.clip_fraction,
            grad_norm: up.grad_norm,
            action_std: self.policy.log_std().iter().map(|s| s.exp()).collect(),
        })
    }

    pub fn checkpoint(&self, config_hash: &str) -> Checkpoint {
        Checkpoint::new(&self.policy, self.env.config(), &self.cfg, config_hash, self.iteration)
    }
}

/// Self-describing policy snapshot with the configuration it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema: String,
    pub config_hash: String,
    pub iteration: usize,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub spec: PolicySpec,
    pub blocks: Vec<ParamBlock>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(policy: &Policy, env: &EnvConfig, ppo: &PpoConfig, config_hash: &str, iteration: usize) -> Self {
        Self {
            schema: CHECKPOINT_SCHEMA.into(),
            config_hash: config_hash.into(),
            iteration,
            env: env.clone(),
            ppo: ppo.clone(),
            spec: policy.spec().clone(),
            blocks: policy.param_blocks(),
            params: policy.params.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text)?;
        if ck.schema != CHECKPOINT_SCHEMA {
            return Err(PpoError::CheckpointMismatch(format!("schema `{}`, expected `{CHECKPOINT_SCHEMA}`", ck.schema)));
        }
        ck.env.validate()?;
        Ok(ck)
    }

    /// Rebuilds the policy, checking the stored shapes.
    pub fn policy(&self) -> Result<Policy> {
        let p = Policy::from_params(self.spec.clone(), self.params.clone())
            .map_err(|e| PpoError::CheckpointMismatch(e.to_string()))?;
        if p.param_blocks() != self.blocks {
            return Err(PpoError::CheckpointMismatch("parameter blocks differ from the network spec".into()));
        }
        Ok(p)
    }
}

/// Files produced by [`train_to_dir`].
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub metrics: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub last: Option<IterationMetrics>,
}

pub fn checkpoint_name(iteration: usize) -> String {
    format!("ckpt-{iteration:06}.json")
}

/// Trains for the configured iterations, writing `metrics.jsonl` and
/// `checkpoints/ckpt-NNNNNN.json` (initial, every `checkpoint_interval`
/// iterations, and final). On divergence the current weights are dumped to
/// `checkpoints/diverged.json` before the error is returned.
pub fn train_to_dir(
    trainer: &mut Trainer,
    out_dir: &Path,
    checkpoint_interval: usize,
    config_hash: &str,
    mut on_iteration: impl FnMut(&IterationMetrics),
) -> Result<TrainOutput> {
    let ckpt_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let metrics_path = out_dir.join("metrics.jsonl");
    let mut log = BufWriter::new(File::create(&metrics_path)?);
    let mut saved = Vec::new();
    let mut save = |trainer: &Trainer| -> Result<()> {
        let p = ckpt_dir.join(checkpoint_name(trainer.iteration()));
        trainer.checkpoint(config_hash).save(&p)?;
        saved.push(p);
        Ok(())
    };
    save(trainer)?;
    let total = trainer.config().iterations;
    let mut last = None;
    while trainer.iteration() < total {
        let m = match trainer.iterate() {
            Ok(m) => m,
            Err(e) => {
                log.flush()?;
                if matches!(e, PpoError::NonFiniteLoss { .. }) {
                    trainer.checkpoint(config_hash).save(&ckpt_dir.join("diverged.json"))?;
                }
                return Err(e);
            }
        };
        serde_json::to_writer(&mut log, &m)?;
        log.write_all(b"\n")?;
        log.flush()?;
        on_iteration(&m);
        let it = trainer.iteration();
        if (checkpoint_interval > 0 && it.is_multiple_of(checkpoint_interval)) || it == total {
            save(trainer)?;
        }
        last = Some(m);
    }
    Ok(TrainOutput { metrics: metrics_path, checkpoints: saved, last })
}

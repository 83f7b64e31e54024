//! Gaussian actor with a separate value network, optionally fed by a shared
//! convolutional image encoder.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{ConvEncoder, EncoderCache, EncoderConfig};
use crate::error::{PpoError, Result};
use crate::nn::{Activation, Mlp, MlpCache};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Rows per parallel work item in batched forward passes.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub activation: Activation,
    /// Initial log standard deviation of every action dimension.
    pub init_log_std: f64,
    /// Image encoder; the leading `rows * cols` observation channels are
    /// then treated as a grayscale image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<EncoderConfig>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![256, 128, 64],
            critic_hidden: vec![256, 128, 64],
            activation: Activation::Elu,
            init_log_std: -0.5,
            encoder: None,
        }
    }
}

/// Everything needed to rebuild a network's parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Image size when an encoder is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<[usize; 2]>,
    pub net: NetConfig,
}

/// Named parameter block, for checkpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    encoder: Option<ConvEncoder>,
    image_len: usize,
    actor: Mlp,
    log_std: usize,
    critic: Mlp,
    n_params: usize,
}

impl Layout {
    fn new(spec: &PolicySpec) -> Result<Self> {
        let net = &spec.net;
        if spec.obs_dim == 0 || spec.action_dim == 0 {
            return Err(PpoError::InvalidConfig("observation and action sizes must be >= 1".into()));
        }
        if net.actor_hidden.contains(&0) || net.critic_hidden.contains(&0) {
            return Err(PpoError::InvalidConfig("hidden layer sizes must be >= 1".into()));
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&net.init_log_std) {
            return Err(PpoError::InvalidConfig(format!("init_log_std must lie in [{LOG_STD_MIN}, {LOG_STD_MAX}]")));
        }
        let (encoder, image_len, trunk_in) = match (&net.encoder, spec.image) {
            (Some(cfg), Some([rows, cols])) => {
                if rows * cols > spec.obs_dim {
                    return Err(PpoError::InvalidConfig("image is larger than the observation".into()));
                }
                let enc = ConvEncoder::new(0, rows, cols, cfg, net.activation)?;
                let n = enc.n_out() + spec.obs_dim - rows * cols;
                (Some(enc), rows * cols, n)
            }
            (Some(_), None) => return Err(PpoError::InvalidConfig("an encoder needs an image observation".into())),
            (None, _) => (None, 0, spec.obs_dim),
        };
        let mut off = encoder.as_ref().map_or(0, ConvEncoder::n_params);
        let actor = Mlp::new(off, trunk_in, &net.actor_hidden, spec.action_dim, net.activation);
        off += actor.n_params();
        let log_std = off;
        off += spec.action_dim;
        let critic = Mlp::new(off, trunk_in, &net.critic_hidden, 1, net.activation);
        off += critic.n_params();
        Ok(Self { encoder, image_len, actor, log_std, critic, n_params: off })
    }
}

/// Outputs for a batch of observations.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    /// `batch x action_dim`, row-major.
    pub mean: Vec<f64>,
    pub value: Vec<f64>,
    /// Clamped log standard deviation, shared by all rows.
    pub log_std: Vec<f64>,
}

/// Activations kept for a backward pass over one chunk of rows.
pub struct ForwardCache {
    encoder: Vec<EncoderCache>,
    actor: MlpCache,
    critic: MlpCache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    spec: PolicySpec,
    layout: Layout,
    pub params: Vec<f64>,
}

impl Policy {
    /// Randomly initialized network: scaled Gaussian weights, zero biases,
    /// a near-zero action mean and `init_log_std`.
    pub fn new(spec: PolicySpec, seed: u64) -> Result<Self> {
        let layout = Layout::new(&spec)?;
        let mut params = vec![0.0; layout.n_params];
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut fill = |offset: usize, len: usize, scale: f64, params: &mut Vec<f64>| {
            for p in &mut params[offset..offset + len] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p = scale * z;
            }
        };
        if let Some(enc) = &layout.encoder {
            for c in &enc.convs {
                let fan_in = c.in_ch * c.kernel * c.kernel;
                fill(c.offset, c.out_ch * fan_in, (2.0 / fan_in as f64).sqrt(), &mut params);
            }
            let h = enc.head;
            fill(h.offset, h.n_in * h.n_out, (2.0 / h.n_in as f64).sqrt(), &mut params);
        }
        for (mlp, out_gain) in [(&layout.actor, 0.01), (&layout.critic, 1.0)] {
            let last = mlp.layers.len() - 1;
            for (i, d) in mlp.layers.iter().enumerate() {
                let gain = if i == last { out_gain } else { 2f64.sqrt() };
                fill(d.offset, d.n_in * d.n_out, gain / (d.n_in as f64).sqrt(), &mut params);
            }
        }
        params[layout.log_std..layout.log_std + spec.action_dim].fill(spec.net.init_log_std);
        Ok(Self { spec, layout, params })
    }

    pub fn from_params(spec: PolicySpec, params: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(&spec)?;
        if params.len() != layout.n_params {
            return Err(PpoError::ShapeMismatch { expected: layout.n_params, got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(PpoError::CheckpointMismatch("non-finite weights".into()));
        }
        Ok(Self { spec, layout, params })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.spec.action_dim
    }

    pub(crate) fn log_std_offset(&self) -> usize {
        self.layout.log_std
    }

    /// Log standard deviation clamped into `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn log_std(&self) -> Vec<f64> {
        let o = self.layout.log_std;
        self.params[o..o + self.spec.action_dim].iter().map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()
    }

    /// Parameter blocks in storage order.
    pub fn param_blocks(&self) -> Vec<ParamBlock> {
        let mut out = Vec::new();
        let block = |name: String, shape: Vec<usize>| ParamBlock { name, shape };
        if let Some(enc) = &self.layout.encoder {
            for (i, c) in enc.convs.iter().enumerate() {
                out.push(block(format!("encoder.conv{i}.weight"), vec![c.out_ch, c.in_ch, c.kernel, c.kernel]));
                out.push(block(format!("encoder.conv{i}.bias"), vec![c.out_ch]));
            }
            out.push(block("encoder.linear.weight".into(), vec![enc.head.n_in, enc.head.n_out]));
            out.push(block("encoder.linear.bias".into(), vec![enc.head.n_out]));
        }
        for (name, mlp) in [("actor", &self.layout.actor), ("critic", &self.layout.critic)] {
            for (i, d) in mlp.layers.iter().enumerate() {
                out.push(block(format!("{name}.{i}.weight"), vec![d.n_in, d.n_out]));
                out.push(block(format!("{name}.{i}.bias"), vec![d.n_out]));
            }
            if name == "actor" {
                out.push(block("log_std".into(), vec![self.spec.action_dim]));
            }
        }
        out
    }

    fn check(&self, obs: &[f64], batch: usize) -> Result<()> {
        if obs.len() != batch * self.spec.obs_dim {
            return Err(PpoError::ShapeMismatch { expected: batch * self.spec.obs_dim, got: obs.len() });
        }
        Ok(())
    }

    /// Forward pass keeping activations for [`Policy::backward`].
    pub fn forward_cached(&self, obs: &[f64], batch: usize) -> Result<(PolicyOutput, ForwardCache)> {
        self.check(obs, batch)?;
        let p = &self.params;
        let (trunk_in, encoder) = match &self.layout.encoder {
            Some(enc) => {
                let il = self.layout.image_len;
                let mut caches = Vec::with_capacity(batch);
                let mut x = Vec::with_capacity(batch * self.layout.actor.n_in());
                for row in obs.chunks_exact(self.spec.obs_dim) {
                    let c = enc.forward(p, &row[..il]);
                    x.extend_from_slice(c.features());
                    x.extend_from_slice(&row[il..]);
                    caches.push(c);
                }
                (x, caches)
            }
            None => (obs.to_vec(), Vec::new()),
        };
        let actor = self.layout.actor.forward(p, trunk_in.clone(), batch);
        let critic = self.layout.critic.forward(p, trunk_in, batch);
        let out = PolicyOutput { mean: actor.output().to_vec(), value: critic.output().to_vec(), log_std: self.log_std() };
        Ok((out, ForwardCache { encoder, actor, critic }))
    }

    /// Batched forward pass, split into fixed chunks that run in parallel.
    /// Results do not depend on the number of workers.
    pub fn forward(&self, obs: &[f64], batch: usize) -> Result<PolicyOutput> {
        self.check(obs, batch)?;
        let parts: Vec<PolicyOutput> = obs
            .par_chunks(CHUNK * self.spec.obs_dim)
            .map(|c| self.forward_cached(c, c.len() / self.spec.obs_dim).map(|(o, _)| o))
            .collect::<Result<_>>()?;
        let mut out = PolicyOutput { mean: Vec::with_capacity(batch * self.spec.action_dim), value: Vec::with_capacity(batch), log_std: self.log_std() };
        for part in parts {
            out.mean.extend(part.mean);
            out.value.extend(part.value);
        }
        Ok(out)
    }

    /// Accumulates parameter gradients from `dL/dmean` and `dL/dvalue`.
    /// The log-std gradient is the caller's responsibility.
    pub fn backward(&self, cache: &ForwardCache, dmean: Vec<f64>, dvalue: Vec<f64>, grad: &mut [f64]) {
        let p = &self.params;
        let need = self.layout.encoder.is_some();
        let dxa = self.layout.actor.backward(p, &cache.actor, dmean, grad, need);
        let dxc = self.layout.critic.backward(p, &cache.critic, dvalue, grad, need);
        if let Some(enc) = &self.layout.encoder {
            let n_in = self.layout.actor.n_in();
            let nf = enc.n_out();
            for (s, c) in cache.encoder.iter().enumerate() {
                let df: Vec<f64> = (0..nf).map(|j| dxa[s * n_in + j] + dxc[s * n_in + j]).collect();
                enc.backward(p, c, &df, grad);
            }
        }
    }
}

/// Log density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (1.0 + (2.0 * PI).ln())).sum()
}

//! Per-environment random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(seed, env index, episode,
//! purpose)`. Distinct keys give independent streams, so an environment's
//! draws never depend on how many other environments exist or in which order
//! they are stepped.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for. Separate purposes keep e.g. observation noise
/// identical whether or not perturbations are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Reset = 1,
    Dynamics = 2,
    Observation = 3,
    Scene = 4,
    Policy = 5,
}

#[derive(Clone, Debug)]
pub struct EnvRng(ChaCha8Rng);

impl EnvRng {
    pub fn derive(seed: u64, env_index: u64, episode: u64, stream: Stream) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&env_index.to_le_bytes());
        key[16..24].copy_from_slice(&episode.to_le_bytes());
        key[24..32].copy_from_slice(&(stream as u64).to_le_bytes());
        Self(ChaCha8Rng::from_seed(key))
    }

    /// A stream not tied to any environment (scene generation, weight init).
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform sample in `[lo, hi]`; returns `lo` for degenerate ranges.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            lo
        } else {
            lo + (hi - lo) * self.0.random::<f64>()
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        p > 0.0 && self.0.random::<f64>() < p
    }

    /// Uniform integer in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

impl RngCore for EnvRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

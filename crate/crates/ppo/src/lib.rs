//! Proximal policy optimization for `wheelsim` environments: dense and
//! convolutional networks with hand-written gradients, GAE, Adam, the
//! training loop and evaluation rollouts.

pub mod conv;
pub mod error;
pub mod gae;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod trainer;

pub use error::{PpoError, Result};
pub use policy::{NetConfig, Policy, PolicySpec};
pub use ppo::PpoConfig;
pub use rollout::{rollout, Controller};
pub use trainer::{train_to_dir, Checkpoint, IterationMetrics, Trainer};

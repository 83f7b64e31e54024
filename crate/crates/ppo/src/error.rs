use thiserror::Error;

pub type Result<T, E = PpoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("shape mismatch: expected {expected} inputs, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },

    #[error("checkpoint does not match: {0}")]
    CheckpointMismatch(String),

    #[error("invalid PPO configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Env(#[from] wheelsim_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
}

use std::path::Path;

use thiserror::Error;
use wheelsim_ppo::PpoError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration error at `{path}`: {msg}")]
    ConfigField { path: String, msg: String },

    #[error(transparent)]
    Train(#[from] PpoError),

    #[error(transparent)]
    Sim(#[from] wheelsim_core::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn field(path: impl Into<String>, msg: impl std::fmt::Display) -> Self {
        CliError::ConfigField { path: path.into(), msg: msg.to_string() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 1 for configuration and input validation errors, 2 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::ConfigField { .. } => 1,
            CliError::Train(e) => match e {
                PpoError::CheckpointMismatch(_) | PpoError::InvalidConfig(_) | PpoError::Json(_) => 1,
                PpoError::Env(e) => sim_code(e),
                PpoError::ShapeMismatch { .. } | PpoError::NonFiniteLoss { .. } | PpoError::Io(_) => 2,
            },
            CliError::Sim(e) => sim_code(e),
            CliError::Io { .. } => 2,
        }
    }
}

fn sim_code(e: &wheelsim_core::Error) -> i32 {
    use wheelsim_core::Error::*;
    match e {
        NonFiniteState(_) | Io(_) | BatchSizeMismatch { .. } => 2,
        InvalidTimestep(_) | InvalidParams(_) | InvalidDims(_) | Overlap { .. } | InvalidScene(_)
        | InvalidRange { .. } | InvalidConfig(_) | Parse { .. } => 1,
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite vehicle state after step ({0})")]
    NonFiniteState(String),

    #[error("invalid time step {0} s (expected 0 < dt <= 0.05)")]
    InvalidTimestep(f64),

    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("overlapping scene features at cell ({row}, {col})")]
    Overlap { row: usize, col: usize },

    #[error("invalid scene specification: {0}")]
    InvalidScene(String),

    #[error("invalid randomization range `{field}`: {reason}")]
    InvalidRange { field: String, reason: String },

    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),

    #[error("batch size mismatch: expected {expected} actions, got {got}")]
    BatchSizeMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

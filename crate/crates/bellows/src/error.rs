use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("mass matrix is not positive definite (Cholesky failed)")]
    SingularMassMatrix,

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("integration diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },

    #[error("rank-deficient regressor; unidentifiable joints: {joints:?}")]
    RankDeficient { joints: Vec<usize> },

    #[error("dataset too short: {got} rows, need at least {need}")]
    DatasetTooShort { need: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training aborted at epoch {epoch}, batch {batch}: {what}")]
    TrainingAborted {
        epoch: usize,
        batch: usize,
        what: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported schema `{found}` (this build reads `{expected}`)")]
    Schema { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

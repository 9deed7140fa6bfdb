//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by estimators, data handling, and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix expected to be symmetric positive-definite failed the
    /// pivot check during factorization.
    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("dataset is empty or too small: {0}")]
    EmptyDataset(String),

    #[error("time series too short: {len} samples, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("all features were pruned; no active feature remains")]
    AllFeaturesPruned,

    #[error("correlation undefined: at least one input has zero variance")]
    UndefinedCorrelation,

    #[error("relevant index set is empty")]
    EmptyRelevantSet,

    #[error("all weights are zero; contributions undefined")]
    AllZeroWeights,

    #[error("k = {k} exceeds the number of sources {len}")]
    KTooLarge { k: usize, len: usize },

    #[error("invalid bandwidth grid: {0}")]
    BadGrid(String),

    /// Malformed user input (CSV contents, feature mismatches, bad flags).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

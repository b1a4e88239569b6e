use thiserror::Error;

/// Errors shared across the benchmark toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bitstring width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("training set contains a bitstring outside the solution space: {0}")]
    InvalidTrainingSet(String),

    #[error("cost is undefined for the empty portfolio (hamming weight 0)")]
    UndefinedCost,

    #[error("query set is empty")]
    EmptyQuerySet,

    #[error("batch {batch} contains no unseen valid samples")]
    NoValidSamples { batch: usize },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("solution space too large to enumerate: |S| = {0}")]
    SpaceTooLarge(u64),

    #[error("malformed distribution: {0}")]
    MalformedDistribution(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

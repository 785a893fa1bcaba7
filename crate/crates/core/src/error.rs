use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode count mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator trace is {0}, expected 1")]
    NotUnitTrace(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation tail mass {tail:e} exceeds {limit:e}; raise the Fock cutoff")]
    TruncationTail { tail: f64, limit: f64 },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("truncation artifact: {0}")]
    TruncationArtifact(String),

    #[error("not separable for any admixture weight up to {0}")]
    NotSeparable(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed operator file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

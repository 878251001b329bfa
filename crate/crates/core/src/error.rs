use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no posterior draws")]
    NoDraws,

    #[error("series too short for a standard error (need at least 2 values, got {0})")]
    SeriesTooShort(usize),

    #[error("JS requires p ≥ 3 (got p = {0})")]
    JsDimension(usize),

    #[error("JS shrinkage undefined for a zero vector")]
    JsZeroNorm,

    #[error("non-finite value in sampler state: {0}")]
    NonFinite(String),

    #[error("Sigma_hat not PSD")]
    NotPositiveDefinite,

    #[error("rank-deficient design: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("assumptions unmet: {0}")]
    AssumptionsUnmet(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

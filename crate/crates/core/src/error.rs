use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration budget exceeded: {needed} terms requested, limit {limit}")]
    BudgetExceeded { needed: f64, limit: f64 },

    #[error("infinite inverse temperature is not accepted by {0}")]
    InfiniteBeta(&'static str),

    #[error("tolerance {eps:e} unreachable: {reason}")]
    Unreachable { eps: f64, reason: String },

    #[error("root not bracketed for beta in (0, {upper}]")]
    RootNotBracketed { upper: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("finite-difference stencil ill-conditioned: {0}")]
    IllConditioned(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] potts_af::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot read config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("{0} is not a finite number")]
    NonFinite(String),

    #[error("invalid option: {0}")]
    Usage(String),
}

impl CliError {
    /// Stable tag for the structured error record.
    pub fn kind(&self) -> &'static str {
        use potts_af::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidParameter(_) => "invalid-parameter",
                E::DimensionMismatch { .. } => "dimension-mismatch",
                E::BudgetExceeded { .. } => "budget-exceeded",
                E::InfiniteBeta(_) => "infinite-beta",
                E::Unreachable { .. } => "tolerance-unreachable",
                E::RootNotBracketed { .. } => "root-not-bracketed",
                E::Unsupported(_) => "unsupported",
                E::IllConditioned(_) => "ill-conditioned",
            },
            CliError::Io { .. } => "io",
            CliError::Config { .. } => "config",
            CliError::NonFinite(_) => "non-finite",
            CliError::Usage(_) => "usage",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the mathematical domain of an operation (NaN input,
    /// non-positive depth, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes, sizes or configuration that violate an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("covariance matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("benchmark equivalence failure: {0}")]
    Equivalence(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the CLI: 2 for contract/config errors, 3
    /// for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::UndefinedMetric(_)
            | Error::Equivalence(_) => 3,
            _ => 2,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero input: {0}")]
    ZeroInput(&'static str),

    #[error("nonsmooth point: |a_{index}^* x| = 0")]
    Nonsmooth { index: usize },

    #[error("measurements do not belong to this ensemble")]
    EnsembleMismatch,

    #[error("power iteration did not converge after {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

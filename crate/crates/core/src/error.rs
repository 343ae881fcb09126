use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A projection or closed form whose precondition does not hold for the input.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("no convergence after {iters} iterations (residual u {residual_u:.3e}, v {residual_v:.3e}, nehari {nehari:.3e})")]
    NonConvergence {
        iters: usize,
        residual_u: f64,
        residual_v: f64,
        nehari: f64,
    },

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

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
}

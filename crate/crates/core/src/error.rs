use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CamelError>;

#[derive(Debug, Error)]
pub enum CamelError {
    /// Caller-supplied arguments violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A covariance block could not be factorized (zero ridge with rank-deficient data).
    #[error("singular covariance: {0}")]
    Singular(String),

    /// Non-finite values or a failed decomposition during optimization.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CamelError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CamelError::InvalidInput(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        CamelError::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CamelError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, CamelError::Singular(_) | CamelError::Numerical(_))
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GtbError>;

#[derive(Debug, Error)]
pub enum GtbError {
    /// Invalid basis specification or model parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    Resource { dim: usize, cap: usize },

    /// Iterative method failed to converge or hit a breakdown.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A builder produced something it should not have (e.g. a complex
    /// residue after phase rotation).
    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for GtbError {
    fn from(err: serde_json::Error) -> Self {
        GtbError::Serialization(err.to_string())
    }
}

impl From<csv::Error> for GtbError {
    fn from(err: csv::Error) -> Self {
        GtbError::Serialization(err.to_string())
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum MilError {
    /// A row of an input file could not be parsed.
    #[error("ingestion error at line {line}: {message}")]
    Ingestion { line: usize, message: String },

    /// The input parsed, but the content is inconsistent (e.g. a bag with mixed class flags).
    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    /// A caller violated an operation's preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration values.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MilError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        MilError::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MilError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, MilError>;

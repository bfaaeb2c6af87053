//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("missing target column '{0}'")]
    MissingTarget(String),

    #[error("no usable rows ({0} rows dropped)")]
    NoUsableRows(usize),

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("row length mismatch: expected {expected}, got {got}")]
    RowLength { expected: usize, got: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible array shapes in a numeric operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation produced a non-finite value where finiteness is guaranteed.
    #[error("numeric domain violation: {0}")]
    NumericDomain(String),

    /// A caller broke an API contract (non-scalar backward root, frozen
    /// distribution update, non-one-hot policy in extraction mode, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Class label outside the valid range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Checkpoint save/load failure (corruption, version or name mismatch).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Invalid run configuration or search-space definition.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Exact-enumeration budget exceeded; caller should fall back to Monte Carlo.
    #[error("enumeration budget exceeded ({0} subnets): use Monte-Carlo sampling instead")]
    EnumerationBudget(u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn checkpoint(msg: impl Into<String>) -> Self {
        Error::Checkpoint(msg.into())
    }
}

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally malformed input (ragged rows, wrong JSON shape).
    #[error("format error: {0}")]
    Format(String),

    /// A field that should be numeric could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("extension error: {0}")]
    Extension(String),

    #[error("cover mismatch: {0}")]
    CoverMismatch(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("search space of {size} exceeds the guard of {limit}")]
    GuardExceeded { size: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

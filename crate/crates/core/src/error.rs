use thiserror::Error;

/// Errors produced by the decomposition routines and their I/O front ends.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (shape, symmetry, ordering).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear system that must be solved is numerically singular.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value {value} at (x = {x}, y = {y})")]
    NonFinite { x: f64, y: f64, value: f64 },

    #[error("linearly dependent basis at index {index}")]
    DependentBasis { index: usize },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}

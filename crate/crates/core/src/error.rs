use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid sparsity parameters k1={k1}, k2={k2}, d={d}: {reason}")]
    InvalidSparsity {
        k1: usize,
        k2: usize,
        d: usize,
        reason: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },

    #[error("enumeration of {count} subsets exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("restricted gradient mismatch at coordinate {index}: restricted={restricted}, masked dense={dense}")]
    RestrictedMismatch {
        index: usize,
        restricted: f64,
        dense: f64,
    },

    #[error("dataset parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use thiserror::Error;

/// Errors raised by the precoding library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("criterion mismatch: {0}")]
    Criterion(String),
    #[error("objective undefined for user {user}: erf sum is not positive")]
    Domain { user: usize },
    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("convex relaxation has no strictly feasible point")]
    Infeasible,
    #[error("enumeration of {candidates} candidates exceeds the cap of {cap}")]
    EnumerationCap { candidates: u128, cap: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

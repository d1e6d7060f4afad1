use thiserror::Error;

use crate::verdict::Witness;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input: dimension mismatch, non-Hermitian
    /// operand, missing operator.
    #[error("input error: {0}")]
    Input(String),

    /// Input outside an operation's domain (non-PSD square root, singular
    /// inverse, non-commuting controllers for the synthesis operator).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("operator is not adjointable: A-valued identity fails by {deviation:.3e}")]
    NotAdjointable { deviation: f64, witness: Box<Witness> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Two routes that must agree exactly disagreed.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

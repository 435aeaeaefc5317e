use thiserror::Error;

use crate::fock::Frame;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter is outside its domain (λ ≥ 1, negative time, η ∉ (0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The call violates an operation precondition (wrong parity, index out of range, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("frame mismatch: expected {expected:?}, found {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    /// A measurement outcome whose projected state has zero norm.
    #[error("empty outcome: the projected state has zero norm")]
    EmptyOutcome,

    #[error("coefficient cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

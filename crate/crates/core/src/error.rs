//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by geometry construction, simulation, solving and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (wrong length, non-positive
    /// variance, empty input, mode mismatch, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Positions of different spatial dimension were mixed.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The target coincides with an antenna, so range gradients and the
    /// SNR model blow up.
    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    /// The Fisher information matrix is singular; no finite bound exists.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A named scenario or method does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// Configuration file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

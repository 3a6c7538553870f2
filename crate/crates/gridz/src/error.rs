//! Crate-wide error type.
//!
//! Numerical routines return structured errors so callers (and the CLI) can
//! distinguish caller mistakes (`InvalidArgument`) from data pathologies
//! (`IllConditioned`, `InsufficientExcitation`) and from genuine numerical
//! breakdowns (`Numerical`, `Conversion`).

use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the arguments was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A regression problem was too ill-conditioned to solve reliably.
    #[error("ill-conditioned data: condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    /// The excitation does not allow resolving the requested quantity.
    #[error("insufficient excitation at {freq_hz} Hz: current-matrix condition {condition:.3e}")]
    InsufficientExcitation { freq_hz: f64, condition: f64 },

    /// A window/frequency combination would cause spectral leakage.
    #[error("spectral leakage: {0}")]
    Leakage(String),

    /// A discrete/continuous model conversion is not defined for the input.
    #[error("conversion error: {0}")]
    Conversion(String),

    /// A model degenerated (wrong dimensions, empty, non-finite entries).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// A fit metric is undefined for the given data (e.g. constant output).
    #[error("undefined fit: {0}")]
    UndefinedFit(String),

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed textual input (CSV/JSON payloads).
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Helper for formatted invalid-argument errors.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

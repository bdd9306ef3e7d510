use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on the mathematical domain was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested accuracy could not be met by the configured truncation
    /// or quadrature budget.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Evaluation hit a pole. Carries the pole location and its order
    /// when the order is known.
    #[error("pole of order {order:?} at {at}")]
    Pole { at: Complex64, order: Option<u32> },

    /// An integration path passes through (or too close to) a singularity.
    #[error("path error: {0}")]
    Path(String),

    /// Requested capability is not implemented (e.g. unsupported pole order).
    #[error("capability error: {0}")]
    Capability(String),

    /// Input structures do not match (dimensions, class layout, ...).
    #[error("structural error: {0}")]
    Structure(String),

    /// Parse failure; `position` is a 0-based byte offset into the input.
    #[error("syntax error at column {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },

    /// Numeric classification could not be decided at the working tolerance.
    #[error("classification error: {0}")]
    Classification(String),

    /// A supplied witness is unusable (singular M, wrong dimensions, ...).
    #[error("witness error: {0}")]
    Witness(String),
}

pub type Result<T> = std::result::Result<T, Error>;

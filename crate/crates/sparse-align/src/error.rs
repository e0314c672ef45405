//! Error taxonomy shared across the crate. Variants map onto the failure
//! classes callers need to tell apart: bad shapes, bad values, violated
//! constraint preconditions, solver/rounding breakdowns, and parse issues.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

fn admissible(max: &usize) -> String {
    if *max == usize::MAX {
        "admissible k >= 1".to_string()
    } else {
        format!("admissible 1..={max}")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of two objects that must agree do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument is structurally valid but semantically unusable
    /// (empty input, out-of-range scalar, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric value that must be finite is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// `k` is outside the admissible range for the requested variant.
    /// `max = usize::MAX` encodes "no upper bound".
    #[error("k out of range for {variant}: k = {k}, {}", admissible(.max))]
    KOutOfRange {
        variant: &'static str,
        k: usize,
        max: usize,
    },

    /// Cost entries violate the sign precondition of a constrained variant.
    #[error("cost sign precondition violated for {variant}: {detail}")]
    ConstraintSign {
        variant: &'static str,
        detail: String,
    },

    /// A transport plan is too diffuse to round to an assignment.
    #[error("rounding failed: {0}")]
    Rounding(String),

    /// Birkhoff-style decomposition could not make progress.
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    /// Instance exceeds an enumeration budget.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// A numeric breakdown inside a solver (underflow/overflow/zero pivot).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed input at a specific line of a text file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally inconsistent input file (e.g. embedding rows of
    /// different dimension).
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

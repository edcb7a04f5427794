use alloc::string::String;
use core::fmt;

use crate::CellKind;

/// In-band failure of a safe-layer operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    /// A view of one storage mode was requested from a cell of another kind.
    KindMismatch { expected: CellKind, found: CellKind },
    /// The cell's kind has no conversion to the requested type.
    NotCoercible { found: CellKind, target: &'static str },
    /// Dimensions were requested from a cell without a dimension record.
    NotAMatrix,
    /// Index past the end of a vector or list.
    OutOfRange { index: usize, length: usize },
    /// No element with this name.
    NoSuchName(String),
    /// Evaluation raised a host error, which was caught.
    Eval(String),
    /// Any other host error, caught at a safe-layer boundary.
    Host(String),
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApiError::KindMismatch { expected, found } => {
                write!(f, "expected a {expected}, found a {found}")
            }
            ApiError::NotCoercible { found, target } => {
                write!(f, "cannot coerce a {found} to {target}")
            }
            ApiError::NotAMatrix => f.write_str("value is not a matrix"),
            ApiError::OutOfRange { index, length } => {
                write!(f, "index {index} out of range for length {length}")
            }
            ApiError::NoSuchName(name) => write!(f, "no element named '{name}'"),
            ApiError::Eval(msg) => write!(f, "evaluation failed: {msg}"),
            ApiError::Host(msg) => write!(f, "host error: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ApiError {}

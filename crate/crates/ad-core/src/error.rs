use std::fmt;

/// Errors surfaced by the kernels, the differentiation engines and the
/// sparse containers.
#[derive(Debug, Clone, PartialEq)]
pub enum AdError {
    /// An operation received an empty vector where at least one element is required.
    EmptyInput(&'static str),
    /// Shape disagreement between two arguments.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Perspective division by a zero third coordinate.
    SingularProjection,
    /// A tape byte stream contained an opcode this engine does not implement.
    UnsupportedOp { opcode: u8 },
    /// Two compressed entries landed on the same (row, seed column) slot.
    CompressionConflict { row: usize, seed_col: usize },
    /// Duplicate (row, col) triplet found while assembling a sparse matrix.
    DuplicateEntry { row: usize, col: usize },
    /// A sparse index lies outside the declared matrix shape.
    IndexOutOfRange { row: usize, col: usize },
    /// Densification or workspace request exceeds the configured guard.
    ResourceLimit { requested: usize, limit: usize },
}

impl fmt::Display for AdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdError::EmptyInput(what) => write!(f, "{what}: empty input"),
            AdError::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            AdError::SingularProjection => {
                write!(f, "perspective division by zero third coordinate")
            }
            AdError::UnsupportedOp { opcode } => {
                write!(f, "unsupported tape opcode {opcode:#04x}")
            }
            AdError::CompressionConflict { row, seed_col } => write!(
                f,
                "compression conflict: two entries share row {row} and seed column {seed_col}"
            ),
            AdError::DuplicateEntry { row, col } => {
                write!(f, "duplicate sparse entry at ({row}, {col})")
            }
            AdError::IndexOutOfRange { row, col } => {
                write!(f, "sparse index ({row}, {col}) out of range")
            }
            AdError::ResourceLimit { requested, limit } => {
                write!(f, "request for {requested} elements exceeds limit {limit}")
            }
        }
    }
}

impl std::error::Error for AdError {}

pub type AdResult<T> = Result<T, AdError>;

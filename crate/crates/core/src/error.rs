use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A text record could not be parsed; `line` is 1-based.
    Parse { line: usize, message: String },
    /// Input violates a data invariant (unsorted change points, bad labels, ...).
    Validation(String),
    /// Input is shorter than an operation requires.
    TooShort {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    InvalidConfig(String),
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    NodeCountMismatch { left: usize, right: usize },
    /// A train/test split left some class without training nodes.
    DegenerateSplit(String),
    Empty(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "parse error on line {line}: {message}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::TooShort { what, needed, got } => {
                write!(f, "{what}: need at least {needed} points, got {got}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::ShapeMismatch { op, left, right } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NodeCountMismatch { left, right } => {
                write!(f, "graphs have different node counts ({left} vs {right})")
            }
            Error::DegenerateSplit(msg) => write!(f, "degenerate split: {msg}; try another mask seed"),
            Error::Empty(what) => write!(f, "{what} is empty"),
        }
    }
}

impl core::error::Error for Error {}

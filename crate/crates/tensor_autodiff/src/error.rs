use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdError {
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    EmptyBatch,
    InvalidLabel { label: usize, classes: usize },
    NotAScalar { shape: Vec<usize> },
    Unsupported(String),
}

impl fmt::Display for AdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdError::ShapeMismatch {
                context,
                expected,
                got,
            } => write!(f, "{context}: shape {got:?} incompatible with {expected:?}"),
            AdError::EmptyBatch => write!(f, "batch of size 0"),
            AdError::InvalidLabel { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            AdError::NotAScalar { shape } => {
                write!(f, "backward needs a scalar loss, got shape {shape:?}")
            }
            AdError::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

impl std::error::Error for AdError {}

pub type Result<T> = std::result::Result<T, AdError>;

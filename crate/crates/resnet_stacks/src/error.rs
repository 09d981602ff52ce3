use std::fmt;
use tensor_autodiff::AdError;

#[derive(Debug, Clone, PartialEq)]
pub enum StackError {
    /// A model configuration field failed validation.
    Config { field: String, message: String },
    /// A Taylor-multistep stage needs at least 3 boot blocks plus one
    /// multistep block.
    InsufficientBlocks { stage: usize, blocks: usize },
    /// Propagated tensor-engine error.
    Engine(AdError),
}

impl StackError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        StackError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for StackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackError::Config { field, message } => write!(f, "config `{field}`: {message}"),
            StackError::InsufficientBlocks { stage, blocks } => write!(
                f,
                "stage {stage}: taylor-multistep stacking needs >= 4 blocks, got {blocks}"
            ),
            StackError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for StackError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            StackError::Engine(e) => Some(e),
            _ => None,
        }
    }
}

impl From<AdError> for StackError {
    fn from(e: AdError) -> Self {
        StackError::Engine(e)
    }
}

pub type Result<T> = std::result::Result<T, StackError>;

use std::fmt;

/// CLI failure classes with a stable exit-code contract: usage errors exit
/// 2, runtime/data errors exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ode_core::OdeError> for CliError {
    fn from(e: ode_core::OdeError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<resnet_stacks::StackError> for CliError {
    fn from(e: resnet_stacks::StackError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<data_io::DataError> for CliError {
    fn from(e: data_io::DataError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<tensor_autodiff::AdError> for CliError {
    fn from(e: tensor_autodiff::AdError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

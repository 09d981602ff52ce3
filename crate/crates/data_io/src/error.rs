use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum DataError {
    FileMissing(PathBuf),
    /// File size is not a whole number of records.
    TruncatedRecord { path: PathBuf, size: u64, record: u64 },
    LabelOutOfRange { label: usize, classes: usize },
    /// IDX header magic did not match.
    BadMagic { path: PathBuf, got: u32, want: u32 },
    /// IDX image and label files disagree on item count.
    DimensionMismatch { images: usize, labels: usize },
    Io(std::io::Error),
    UnsupportedVersion(u32),
    /// Checkpoint payload disagrees with its config-derived layout.
    CorruptBlob(String),
    /// Checkpoint belongs to a different model configuration.
    ConfigError(String),
    Model(resnet_stacks::StackError),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::FileMissing(p) => write!(f, "missing file {}", p.display()),
            DataError::TruncatedRecord { path, size, record } => write!(
                f,
                "{}: size {size} is not a multiple of the {record}-byte record",
                path.display()
            ),
            DataError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            DataError::BadMagic { path, got, want } => write!(
                f,
                "{}: bad magic {got:#010x}, expected {want:#010x}",
                path.display()
            ),
            DataError::DimensionMismatch { images, labels } => {
                write!(f, "{images} images but {labels} labels")
            }
            DataError::Io(e) => write!(f, "io error: {e}"),
            DataError::UnsupportedVersion(v) => write!(f, "unsupported checkpoint version {v}"),
            DataError::CorruptBlob(msg) => write!(f, "corrupt checkpoint: {msg}"),
            DataError::ConfigError(msg) => write!(f, "config mismatch: {msg}"),
            DataError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DataError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DataError::Io(e) => Some(e),
            DataError::Model(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

impl From<resnet_stacks::StackError> for DataError {
    fn from(e: resnet_stacks::StackError) -> Self {
        DataError::Model(e)
    }
}

pub type Result<T> = std::result::Result<T, DataError>;

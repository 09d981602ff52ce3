use std::fmt;

/// Errors produced by integrators and order estimation.
#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    /// The right-hand side (or the resulting state) contained NaN or infinity.
    /// `step` is the index of the state being produced when known.
    NonFiniteState { t: f64, step: Option<usize> },
    /// The three history states do not share one dimension, or they do not
    /// match the problem dimension.
    HistoryShapeMismatch { dims: [usize; 3], problem: usize },
    /// Step size must be positive and finite.
    InvalidStepSize(f64),
    /// Order estimation requires a closed-form solution on the problem.
    MissingExactSolution { problem: String },
    /// All terminal errors were below 1e-14; the log-log slope is undefined.
    DegenerateFit,
    /// A precondition on the call arguments failed.
    InvalidArgument(String),
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::NonFiniteState { t, step: Some(step) } => {
                write!(f, "non-finite state at t = {t} (step {step})")
            }
            OdeError::NonFiniteState { t, step: None } => {
                write!(f, "non-finite state at t = {t}")
            }
            OdeError::HistoryShapeMismatch { dims, problem } => write!(
                f,
                "history state dimensions {:?} incompatible with problem dimension {}",
                dims, problem
            ),
            OdeError::InvalidStepSize(tau) => write!(f, "invalid step size {tau}"),
            OdeError::MissingExactSolution { problem } => {
                write!(f, "problem '{problem}' has no exact solution")
            }
            OdeError::DegenerateFit => {
                write!(f, "all errors below 1e-14; fitted order is undefined")
            }
            OdeError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for OdeError {}

pub type Result<T> = std::result::Result<T, OdeError>;

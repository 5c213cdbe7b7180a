use std::fmt;

use thiserror::Error;

/// Standing assumptions on the agent and network that synthesis relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// A is neutrally stable (output-coupled problem).
    A1,
    /// (C, A) is detectable.
    A2,
    /// A is neutrally stable (state-coupled problem).
    B1,
    /// (A, B) is stabilizable.
    B2,
    /// The coupling matrix is connected.
    Connectivity,
}

impl Assumption {
    pub fn describe(self) -> &'static str {
        match self {
            Assumption::A1 | Assumption::B1 => "A is neutrally stable",
            Assumption::A2 => "(C, A) is detectable",
            Assumption::B2 => "(A, B) is stabilizable",
            Assumption::Connectivity => "topology is connected",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::A1 => write!(f, "A1"),
            Assumption::A2 => write!(f, "A2"),
            Assumption::B1 => write!(f, "B1"),
            Assumption::B2 => write!(f, "B2"),
            Assumption::Connectivity => write!(f, "connectivity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("ill-conditioned modal split: {0}")]
    IllConditionedSplit(String),
    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolated { assumption: Assumption, detail: String },
    #[error("invalid coupling matrix: {0}")]
    InvalidTopology(String),
    #[error("topology not connected")]
    NotConnected,
    #[error("singular matrix equation: {0}")]
    SingularEquation(String),
    #[error("gain kind does not match the agent: {0}")]
    KindMismatch(String),
    #[error("step-size guard violated: {0}")]
    StepSizeGuard(String),
    #[error("non-finite state at step {0}")]
    Diverged(usize),
    #[error("synthesized gain failed validation: {0}")]
    ValidationFailed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// The violated assumption, if this error is a precondition rejection.
    pub fn assumption(&self) -> Option<Assumption> {
        match self {
            Error::AssumptionViolated { assumption, .. } => Some(*assumption),
            Error::NotConnected => Some(Assumption::Connectivity),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the solvers, problem builders and data readers.
#[derive(Debug, Error)]
pub enum DcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exact F unavailable: program has no finite component set or snapshot dataset")]
    ExactObjectiveUnavailable,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate smoothness constant: all feature vectors are zero")]
    DegenerateSmoothness,

    #[error("subproblem is unbounded below (|c_j| = {magnitude} exceeds weight {weight})")]
    UnboundedSubproblem { magnitude: f64, weight: f64 },

    #[error("subproblem solver did not converge after {iterations} iterations (residual {residual:e})")]
    SubproblemNotConverged { iterations: usize, residual: f64 },

    #[error("gap undefined: {0}")]
    GapUndefined(Box<DcError>),

    #[error("no subdifferential model for the nonsmooth part G + r1")]
    MissingSubdifferentialModel,

    #[error("estimator requires finite sum")]
    RequiresFiniteSum,

    #[error("budget of {budget} gradient evaluations is exhausted before a single iteration (initial batch needs {needed})")]
    BudgetExhausted { budget: u64, needed: u64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Parse(#[from] crate::data::ParseError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DcError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> DcError {
    DcError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

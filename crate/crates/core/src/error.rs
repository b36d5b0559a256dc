use thiserror::Error;

/// Errors raised by the library. Validation findings that are data (graph
/// degree violations, pairing mismatches) are returned as reports instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("R not positive semidefinite at label {label} (min eigenvalue {min_eig:.3e})")]
    IndefiniteR { label: usize, min_eig: f64 },

    #[error("singular performance index at label {0}")]
    SingularIndex(usize),

    #[error("Q~ is not negative semidefinite at label {0}")]
    DualSideCondition(usize),

    #[error("product of two decision variables in an LMI block")]
    NonAffine,

    #[error("walk budget exceeded: more than {0} walks")]
    WalkBudget(usize),

    #[error("infeasible at the upper bracket gamma = {0}")]
    InfeasibleAtBracket(f64),

    #[error("non-monotone bisection trace: feasible at {feasible} but infeasible at {infeasible}")]
    NonMonotone { feasible: f64, infeasible: f64 },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("controller recovery ill-conditioned at node {node} (condition number {cond:.3e})")]
    IllConditioned { node: u32, cond: f64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}

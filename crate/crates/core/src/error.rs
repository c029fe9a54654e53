use thiserror::Error;

/// Errors raised by problem construction, solvers and metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("min block is not strongly convex (mu_x = {0:e})")]
    NotStronglyConvex(f64),
    #[error("max block is not strongly concave (mu_y = {0:e})")]
    NotStronglyConcave(f64),
    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("feature covariance is singular (smallest eigenvalue {0:e})")]
    SingularC(f64),
    #[error("robust least squares needs lambda > 1, got {0}")]
    LambdaTooSmall(f64),
    #[error("non-finite iterate at iteration {iteration}")]
    NumericalDivergence { iteration: usize },
    #[error("feasible set is unbounded and no radius override was given")]
    UnboundedDomain,
    #[error("operation needs quadratic components")]
    NonQuadratic,
    #[error("operation needs an unconstrained problem")]
    Constrained,
    #[error("linear system is singular or badly solved (residual {0:e})")]
    SingularSystem(f64),
    #[error("inner problem is unbounded")]
    InnerUnbounded,
    #[error("distance did not decrease between the two trace indices")]
    NonDecreasing,
    #[error("degenerate regression input: {0}")]
    DegenerateFit(String),
    #[error("trace format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

use thiserror::Error;

/// Errors raised while validating inputs or running a solve.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("Jacobi eigenvalue iteration did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("eigenvector column {0} has no negative entry but a zero entry")]
    DegenerateColumn(usize),

    #[error("zero pivot at row {0} in tridiagonal factorisation")]
    ZeroPivot(usize),

    #[error("exercise date {0} does not fall on the time grid")]
    MisalignedSchedule(usize),

    #[error("target {0} lies outside the interpolation range")]
    OutOfRange(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

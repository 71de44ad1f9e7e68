use thiserror::Error;

/// Errors raised by the matrix kernel, the minimizers and the solvers.
#[derive(Debug, Error)]
pub enum FaError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.6e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:.6e}")]
    NotPd { min_eigenvalue: f64 },

    #[error("singular matrix: {block}")]
    Singular { block: String },

    #[error("ill-conditioned {block}: condition estimate {condition:.3e} exceeds 1e14")]
    IllConditioned { block: String, condition: f64 },

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("infeasible singular pattern: n2 = {n2} exceeds k = {k}")]
    InfeasiblePattern { n2: usize, k: usize },

    #[error("covariance admits no exact factor model with this split: off-diagonal norm {offdiag_norm:.3e}")]
    NotExactlyRealizable { offdiag_norm: f64 },

    #[error("divergence increased at iteration {iter}: {previous:.17e} -> {current:.17e}")]
    MonotonicityViolation {
        iter: usize,
        previous: f64,
        current: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FaError>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, found: impl ToString) -> FaError {
    FaError::Dimension {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

pub(crate) fn singular(block: impl Into<String>) -> FaError {
    FaError::Singular {
        block: block.into(),
    }
}

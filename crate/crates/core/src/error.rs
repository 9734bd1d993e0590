use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid block structure: {0}")]
    InvalidStructure(String),

    #[error("operator is not self-adjoint (relative asymmetry {0:e})")]
    NotSelfAdjoint(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {min_eig:e}, norm {norm:e})")]
    NotPsd { min_eig: f64, norm: f64 },

    #[error("operator is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("inadmissible configuration: {0}")]
    Inadmissible(String),

    #[error("subproblem solve failed: {0}")]
    Subproblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: field `{field}`: {msg}")]
    Parse {
        line: usize,
        field: String,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

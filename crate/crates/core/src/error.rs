use thiserror::Error;

/// Errors shared across the solver library.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("matrix market parse error: {0}")]
    MatrixMarket(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("H-annihilated residual (Hr = 0): normal equation satisfied at current iterate")]
    HAnnihilatedResidual,

    #[error("Krylov cache overflow: non-finite column at order {order}; consider Jacobi scaling")]
    CacheOverflow { order: usize },

    #[error("PSD contract violation: {0}")]
    PsdViolation(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;

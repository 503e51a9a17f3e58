use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("binomial coefficient overflows for d={d}, k={k}")]
    Overflow { d: usize, k: usize },
    #[error("symbol {sym} out of range for local dimension {d}")]
    SymbolOutOfRange { sym: usize, d: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("reduced state is singular (min eigenvalue {0:e}); restrict to its support first")]
    SingularReduced(f64),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than a solver.
    pub fn is_input(&self) -> bool {
        !matches!(self, Error::Eigen | Error::NotPositiveDefinite(_) | Error::Solver(_))
    }
}

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrfError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("embedding spectrum has negative eigenvalues (min {min_eigenvalue:.3e}); enlarge the padding factor")]
    NegativeSpectrum { min_eigenvalue: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GrfError>;

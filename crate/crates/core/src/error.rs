use thiserror::Error;

/// Errors raised by the geometry, flow and diagnostics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("curve is not regular: {0}")]
    Regularity(String),
    #[error("stencil does not fit: {0}")]
    Stencil(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("field is not normal to the curve: {0}")]
    Normality(String),
    #[error("field violates clamped boundary conditions: {0}")]
    Boundary(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("maximum number of steps reached: {0}")]
    MaxSteps(String),
    #[error("normal frame degenerated: {0}")]
    FrameDegeneracy(String),
    #[error("normal-graph projection failed: {0}")]
    Projection(String),
    #[error("energy below floor: {0}")]
    Floor(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

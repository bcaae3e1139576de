use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("transform plan of order {plan} does not match problem order {problem}")]
    OrderMismatch { plan: usize, problem: usize },

    #[error("dimension mismatch: expected d = {expected}, got d = {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension d = {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration for Gauss node {index} of order {order} did not converge")]
    GaussNoConvergence { order: usize, index: usize },

    #[error("quadrature order {got} is too small, at least {required} nodes are needed")]
    InsufficientQuadrature { required: usize, got: usize },

    #[error("diffusion coefficient {name} reaches {value:e}, must stay above a positive floor")]
    NonPositiveCoefficient { name: String, value: f64 },

    #[error("ILU(0) breakdown: pivot {value:e} at row {row}")]
    ZeroPivot { row: usize, value: f64 },

    #[error("zero diagonal entry in upper factor at row {row}")]
    ZeroDiagonal { row: usize },

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("search direction lost positive definiteness at iteration {iteration} (p^T w = {curvature:e})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("dense assembly of {rows} rows exceeds the guard of {limit}")]
    SizeGuard { rows: usize, limit: usize },

    #[error("matrix is singular to working precision at column {0}")]
    Singular(usize),

    #[error("matrix market parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

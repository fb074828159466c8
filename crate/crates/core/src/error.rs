use thiserror::Error;

/// Errors raised by mesh construction, discretization, and error evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("cell index {index} out of range (mesh has {count} cells)")]
    CellOutOfRange { index: usize, count: usize },

    #[error("no quadrature rule of degree {degree} for dimension {dim}")]
    QuadratureUnavailable { dim: usize, degree: usize },

    #[error("non-finite value {value} at ({x}, {y})")]
    NonFinite { value: f64, x: f64, y: f64 },

    /// A coefficient condition required by the requested theorem or weight fails.
    #[error("regime violation: {0}")]
    Regime(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("expression is not differentiable: {0}")]
    NotDifferentiable(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("missing oracle data: {0}")]
    MissingOracle(String),

    #[error("manufactured solution does not vanish on the boundary (residual {residual:e} at ({x}, {y}))")]
    BoundaryResidual { residual: f64, x: f64, y: f64 },

    #[error("boundary condition violated: {0}")]
    BoundaryCondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;

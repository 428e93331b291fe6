use thiserror::Error;

use crate::discretization::LinearSolveReport;
use crate::minimize::MinimizeReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {len} values but the grid has {expected} nodes")]
    LengthMismatch { len: usize, expected: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("fields are defined on incompatible grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "conjugate gradients did not converge: {} iterations, residual {:e}",
        .0.iterations,
        .0.final_residual
    )]
    LinearSolve(LinearSolveReport),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("newton line search stalled at iteration {iterations} (residual {residual:e})")]
    NewtonStalled { iterations: usize, residual: f64 },

    #[error(
        "minimization stagnated after {} iterations (gradient norm {:e})",
        .0.outer_iterations,
        .0.final_gradient_norm
    )]
    Stagnation(MinimizeReport),

    #[error(
        "minimization hit the iteration cap ({} iterations, gradient norm {:e})",
        .0.outer_iterations,
        .0.final_gradient_norm
    )]
    MaxIterations(MinimizeReport),

    #[error("multilevel level {level}: {source}")]
    Level { level: usize, source: Box<Error> },

    #[error("time step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("no interface: the field does not change sign along the measurement ray")]
    VanishedInterface,

    #[error("geometry does not fit the domain: {0}")]
    Geometry(String),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step { step, source: Box::new(self) }
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::Level { level, source: Box::new(self) }
    }
}

//! Allen–Cahn phase-field solvers for mean curvature flow through topological
//! changes, with a level-set reference solver and benchmark diagnostics.
//!
//! The per-step problems are posed on a uniform grid over a square box with
//! P1 elements, mass lumping and natural (Neumann) boundary conditions.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod discretization;
pub mod energy;
pub mod error;
pub mod levelset;
pub mod minimize;
pub mod schemes;

pub use discretization::{Field, GridSpec};
pub use energy::{Functional, StepParams};
pub use error::{Error, Result};

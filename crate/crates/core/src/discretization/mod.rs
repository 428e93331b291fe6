//! Uniform-grid P1 discretization with mass lumping and homogeneous Neumann
//! boundary conditions.
//!
//! Nodes are stored row-major: node `(i, j)` (column `i` along x, row `j`
//! along y) lives at index `j * (n + 1) + i`.

mod linear;
mod operators;
mod transfer;

pub use linear::{solve_screened_poisson, LinearSolveReport};
pub(crate) use linear::{solve_shifted, CgFailure};
pub use operators::{
    apply_neumann_laplacian, dirichlet_energy, lumped_inner_product, lumped_norm,
};
pub(crate) use operators::{dirichlet_energy_of, laplacian_into, lumped_dot, lumped_weights, weighted_sum};
pub use transfer::{prolongate, restrict};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BOX_TOL: f64 = 1e-9;

/// Uniform square-cell grid over an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("need at least one cell per dimension".into()));
        }
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite box bounds".into()));
        }
        let (wx, wy) = (x_max - x_min, y_max - y_min);
        if wx <= 0.0 || wy <= 0.0 {
            return Err(Error::InvalidGrid(format!("empty box [{x_min}, {x_max}] x [{y_min}, {y_max}]")));
        }
        if (wx - wy).abs() > BOX_TOL * wx.max(wy) {
            return Err(Error::InvalidGrid(format!("cells are not square: width {wx}, height {wy}")));
        }
        Ok(Self { x_min, x_max, y_min, y_max, n })
    }

    /// `n` cells per side on `[-0.5, 0.5]^2`.
    pub fn unit_box(n: usize) -> Result<Self> {
        Self::new(-0.5, 0.5, -0.5, 0.5, n)
    }

    /// Same box as `self`, with the cell count closest to spacing `h`.
    pub fn with_spacing(&self, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let n = ((self.x_max - self.x_min) / h).round().max(1.0) as usize;
        Self::new(self.x_min, self.x_max, self.y_min, self.y_max, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nodes per dimension.
    pub fn nodes_per_side(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x_min, self.x_max, self.y_min, self.y_max)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.h()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// True when both grids cover the same box (up to round-off).
    pub fn same_box(&self, other: &GridSpec) -> bool {
        let scale = (self.x_max - self.x_min).abs().max(1.0);
        let close = |a: f64, b: f64| (a - b).abs() <= BOX_TOL * scale;
        close(self.x_min, other.x_min)
            && close(self.x_max, other.x_max)
            && close(self.y_min, other.y_min)
            && close(self.y_max, other.y_max)
    }
}

/// Nodal values of a continuous piecewise-linear function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch { len: values.len(), expected: grid.node_count() });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { grid, values })
    }

    /// Caller guarantees length; finiteness is only debug-asserted.
    pub(crate) fn from_vec(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        Self { grid, values: vec![value; grid.node_count()] }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let m = grid.nodes_per_side();
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..m {
            let y = grid.y(j);
            for i in 0..m {
                values.push(f(grid.x(i), y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest nodal difference; errors when the grids differ.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Every node within `tol` of `target`.
    pub fn is_uniform_near(&self, target: f64, tol: f64) -> bool {
        self.values.iter().all(|v| (v - target).abs() <= tol)
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

//! Double-well potential, the Allen–Cahn free energy and the per-step
//! functionals minimized by the time-stepping algorithms.
//!
//! All nonlinear terms are evaluated nodally and integrated with the lumped
//! (trapezoidal) mass, so their first variations act diagonally.

use serde::{Deserialize, Serialize};

use crate::discretization::{dirichlet_energy_of, laplacian_into, weighted_sum, Field, GridSpec};
use crate::error::{Error, Result};

/// Which per-step functional is being minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `E(u) = J_eps(u) + |u - u_prev|² / (2k)`.
    Plain,
    /// `E(u) + (delta / eps²) ∫ (F(u) - F(u_prev))`.
    Penalized,
    /// `E(u) + delta (J_eps(u_prev) - J_eps(u))`; requires `delta < 1`.
    ScaledRemark,
}

/// Parameters of one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub eps: f64,
    pub k: f64,
    pub delta: f64,
    pub functional: Functional,
}

impl Functional {
    pub fn as_str(&self) -> &'static str {
        match self {
            Functional::Plain => "plain",
            Functional::Penalized => "penalized",
            Functional::ScaledRemark => "scaled_remark",
        }
    }
}

impl StepParams {
    pub fn new(eps: f64, k: f64, delta: f64, functional: Functional) -> Result<Self> {
        let p = Self { eps, k, delta, functional };
        p.validate()?;
        Ok(p)
    }

    /// Plain functional, no penalty.
    pub fn plain(eps: f64, k: f64) -> Result<Self> {
        Self::new(eps, k, 0.0, Functional::Plain)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {}", self.k)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if self.functional == Functional::ScaledRemark && self.delta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "the scaled functional needs delta < 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub(crate) fn inv_eps2(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }

    /// Nodal convexity of the plain step functional: `k <= eps²`.
    pub fn is_convex_step(&self) -> bool {
        self.k <= self.eps * self.eps
    }

    /// Factors `(spatial, reaction)` such that the first variation is
    /// `(u - u_prev)/k - spatial Δ_h u + reaction f(u)/eps²`.
    pub(crate) fn gradient_factors(&self) -> (f64, f64) {
        match self.functional {
            Functional::Plain => (1.0, 1.0),
            Functional::Penalized => (1.0, 1.0 + self.delta),
            Functional::ScaledRemark => (1.0 - self.delta, 1.0 - self.delta),
        }
    }
}

/// `F(u) = ¼(u² - 1)²` and `f = F'(u) = u³ - u`.
#[inline]
pub fn double_well(u: f64) -> (f64, f64) {
    let s = u * u - 1.0;
    (0.25 * s * s, u * s)
}

#[inline]
pub(crate) fn potential(u: f64) -> f64 {
    let s = u * u - 1.0;
    0.25 * s * s
}

/// `∫ F(u)` with lumped quadrature.
pub fn potential_energy(u: &Field) -> f64 {
    potential_of(u.grid(), u.values())
}

fn potential_of(grid: &GridSpec, u: &[f64]) -> f64 {
    weighted_sum(grid, |i| potential(u[i]))
}

fn j_eps_of(grid: &GridSpec, u: &[f64], eps: f64) -> f64 {
    dirichlet_energy_of(grid, u) + potential_of(grid, u) / (eps * eps)
}

/// Free energy `J_eps(u) = ∫ ½|∇u|² + F(u)/eps²`.
pub fn j_eps(u: &Field, eps: f64) -> f64 {
    j_eps_of(u.grid(), u.values(), eps)
}

/// Value of the functional selected by `p.functional` on raw nodal slices.
pub(crate) fn functional_value_of(grid: &GridSpec, u: &[f64], v: &[f64], p: &StepParams) -> f64 {
    let j_u = j_eps_of(grid, u, p.eps);
    let proximal = weighted_sum(grid, |i| (u[i] - v[i]).powi(2)) / (2.0 * p.k);
    let base = j_u + proximal;
    if p.delta == 0.0 {
        return base;
    }
    match p.functional {
        Functional::Plain => base,
        Functional::Penalized => {
            base + p.delta * (potential_of(grid, u) - potential_of(grid, v)) * p.inv_eps2()
        }
        Functional::ScaledRemark => base + p.delta * (j_eps_of(grid, v, p.eps) - j_u),
    }
}

/// `E_n(u; u_prev) = J_eps(u) + |u - u_prev|²/(2k)`.
pub fn step_energy(u: &Field, u_prev: &Field, p: &StepParams) -> Result<f64> {
    u.check_same_grid(u_prev)?;
    let plain = StepParams { functional: Functional::Plain, ..*p };
    Ok(functional_value_of(u.grid(), u.values(), u_prev.values(), &plain))
}

/// `E_n(u; u_prev) + delta ∫ (F(u) - F(u_prev)) / eps²`. May be negative.
pub fn penalized_step_energy(u: &Field, u_prev: &Field, p: &StepParams) -> Result<f64> {
    u.check_same_grid(u_prev)?;
    let pen = StepParams { functional: Functional::Penalized, ..*p };
    Ok(functional_value_of(u.grid(), u.values(), u_prev.values(), &pen))
}

/// `E_n(u; u_prev) + delta (J_eps(u_prev) - J_eps(u))`.
pub fn scaled_step_energy(u: &Field, u_prev: &Field, p: &StepParams) -> Result<f64> {
    u.check_same_grid(u_prev)?;
    let scaled = StepParams { functional: Functional::ScaledRemark, ..*p };
    Ok(functional_value_of(u.grid(), u.values(), u_prev.values(), &scaled))
}

/// Value of the functional selected by `p.functional`.
pub fn functional_value(u: &Field, u_prev: &Field, p: &StepParams) -> Result<f64> {
    u.check_same_grid(u_prev)?;
    Ok(functional_value_of(u.grid(), u.values(), u_prev.values(), p))
}

pub(crate) fn gradient_into(u: &[f64], u_prev: &[f64], field: &Field, p: &StepParams, out: &mut [f64]) {
    let (spatial, reaction) = p.gradient_factors();
    let inv_k = 1.0 / p.k;
    let a = reaction * p.inv_eps2();
    laplacian_into(field.grid(), u, out);
    for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(u_prev) {
        *o = (ui - vi) * inv_k - spatial * *o + a * ui * (ui * ui - 1.0);
    }
}

/// Lumped-L² Riesz representative of the first variation of the selected
/// functional at `u`.
pub fn energy_gradient(u: &Field, u_prev: &Field, p: &StepParams) -> Result<Field> {
    u.check_same_grid(u_prev)?;
    p.validate()?;
    let mut out = vec![0.0; u.values().len()];
    gradient_into(u.values(), u_prev.values(), u, p, &mut out);
    Ok(Field::from_vec(*u.grid(), out))
}

/// Second variation as `diag(d) - beta Δ_h`: returns `(d, beta)`.
pub(crate) fn hessian_parts(u: &[f64], p: &StepParams) -> (Vec<f64>, f64) {
    let (spatial, reaction) = p.gradient_factors();
    let inv_k = 1.0 / p.k;
    let a = reaction * p.inv_eps2();
    let d = u.iter().map(|&ui| inv_k + a * (3.0 * ui * ui - 1.0)).collect();
    (d, spatial)
}

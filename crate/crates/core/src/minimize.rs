//! Time stepping by direct minimization of the per-step functional, and the
//! coarse-to-fine multilevel variant that starts each step from large,
//! convex interaction lengths.

use serde::{Deserialize, Serialize};

use crate::discretization::{
    lumped_dot, prolongate, restrict, solve_shifted, CgFailure, Field, GridSpec,
};
use crate::energy::{functional_value_of, gradient_into, hessian_parts, Functional, StepParams};
use crate::error::{Error, Result};
use crate::schemes::{solve_newton_system, SolveStats, Stepper};

/// Outer-iteration cap of [`minimize_functional`].
pub const MAX_OUTER_ITERATIONS: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const LINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub outer_iterations: usize,
    pub final_gradient_norm: f64,
    /// Functional value at the guess and after every accepted step.
    pub energy_trace: Vec<f64>,
    /// Iterations that fell back to the convexified direction.
    pub fallback_steps: usize,
    /// Shift increases of the Levenberg-regularized Newton systems.
    #[serde(default)]
    pub shifted_steps: usize,
    pub linear_iterations: usize,
}

struct Problem<'a> {
    grid: GridSpec,
    u_prev: &'a Field,
    params: StepParams,
}

impl Problem<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        functional_value_of(&self.grid, u, self.u_prev.values(), &self.params)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        gradient_into(u, self.u_prev.values(), self.u_prev, &self.params, out);
    }

    fn norm(&self, v: &[f64]) -> f64 {
        lumped_dot(&self.grid, v, v).sqrt()
    }

    /// Solves `(H + shift) d = -grad`; `None` when the shifted Hessian is
    /// not positive definite or CG fails to converge.
    fn shifted_newton_direction(
        &self,
        u: &[f64],
        grad: &[f64],
        shift: f64,
        report: &mut MinimizeReport,
    ) -> Option<Vec<f64>> {
        let (mut diag, beta) = hessian_parts(u, &self.params);
        for d in diag.iter_mut() {
            *d += shift;
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let cap = 10 * (self.grid.n() + 1);
        match solve_shifted(&self.grid, &diag, beta, &rhs, None, LINEAR_TOL, cap) {
            Ok((d, r)) => {
                report.linear_iterations += r.iterations;
                Some(d)
            }
            Err(CgFailure::Indefinite { iterations }) => {
                report.linear_iterations += iterations;
                None
            }
            Err(CgFailure::NotConverged(r)) => {
                report.linear_iterations += r.iterations;
                None
            }
        }
    }

    /// Smallest diagonal shift that makes the Hessian at `u` positive
    /// definite with margin `1/k`.
    fn safe_shift(&self, u: &[f64]) -> f64 {
        let (diag, _) = hessian_parts(u, &self.params);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        (1.0 / self.params.k - min).max(0.0)
    }

    /// Steepest descent in the metric of the Hessian with its negative
    /// reaction curvature removed; always a descent direction.
    fn convexified_direction(&self, u: &[f64], grad: &[f64], report: &mut MinimizeReport) -> Result<Vec<f64>> {
        let (mut diag, beta) = hessian_parts(u, &self.params);
        let floor = 1.0 / self.params.k;
        for d in diag.iter_mut() {
            *d = d.max(floor);
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let (d, r) = solve_newton_system(&self.grid, diag, beta, &rhs, LINEAR_TOL, 1e-8 * floor)?;
        report.linear_iterations += r.iterations;
        Ok(d)
    }

    /// Levenberg-shifted Newton direction. The shift grows until the shifted
    /// system is positive definite and yields descent; at the safe shift it
    /// always does.
    fn levenberg_direction(
        &self,
        u: &[f64],
        grad: &[f64],
        shift: &mut f64,
        report: &mut MinimizeReport,
    ) -> Option<Vec<f64>> {
        let safe = self.safe_shift(u);
        let floor = 1e-3 / self.params.k;
        loop {
            let current = shift.min(safe);
            if let Some(d) = self.shifted_newton_direction(u, grad, current, report) {
                if lumped_dot(&self.grid, grad, &d) < 0.0 {
                    *shift = current;
                    return Some(d);
                }
            }
            if current >= safe {
                return None;
            }
            *shift = (4.0 * current).max(floor);
            if current > 0.0 {
                report.shifted_steps += 1;
            }
        }
    }
}

/// Minimizes the functional `functional` (with the constants in `p`) over
/// nodal fields, starting from `u_guess`.
///
/// Newton directions with an adaptive Levenberg shift and Armijo
/// backtracking on the functional value; when no shifted direction is
/// accepted a convexified (always-descending) direction is used instead. Returns once
/// the lumped norm of the gradient is at most `tol`.
pub fn minimize_functional(
    functional: Functional,
    u_guess: &Field,
    u_prev: &Field,
    p: &StepParams,
    tol: f64,
) -> Result<(Field, MinimizeReport)> {
    u_guess.check_same_grid(u_prev)?;
    let params = StepParams { functional, ..*p };
    params.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let problem = Problem { grid: *u_prev.grid(), u_prev, params };
    let len = u_prev.values().len();

    let mut u = u_guess.values().to_vec();
    let mut grad = vec![0.0; len];
    let mut trial = vec![0.0; len];
    let mut trial_grad = vec![0.0; len];
    let mut energy = problem.value(&u);
    problem.gradient(&u, &mut grad);
    let mut g_norm = problem.norm(&grad);
    let mut report = MinimizeReport { energy_trace: vec![energy], ..Default::default() };
    let mut shift = 0.0;

    while g_norm > tol {
        if report.outer_iterations == MAX_OUTER_ITERATIONS {
            report.final_gradient_norm = g_norm;
            return Err(Error::MaxIterations(report));
        }
        report.outer_iterations += 1;

        let mut accepted = false;
        for attempt in 0..2 {
            let dir = if attempt == 0 {
                match problem.levenberg_direction(&u, &grad, &mut shift, &mut report) {
                    Some(d) => d,
                    None => continue,
                }
            } else {
                report.fallback_steps += 1;
                problem.convexified_direction(&u, &grad, &mut report)?
            };
            let slope = lumped_dot(&problem.grid, &grad, &dir);
            if !(slope < 0.0) {
                continue;
            }
            let roundoff = 1e-13 * energy.abs().max(1.0);
            let mut alpha = 1.0;
            for halving in 0..=MAX_HALVINGS {
                for ((t, &ui), &di) in trial.iter_mut().zip(&u).zip(&dir) {
                    *t = ui + alpha * di;
                }
                let e_trial = problem.value(&trial);
                if e_trial.is_finite() {
                    let armijo = e_trial <= energy + ARMIJO * alpha * slope;
                    // below round-off the energy cannot discriminate; fall back
                    // on the gradient norm
                    let flat = e_trial - energy <= roundoff && (alpha * slope).abs() <= roundoff;
                    if armijo || flat {
                        problem.gradient(&trial, &mut trial_grad);
                        let t_norm = problem.norm(&trial_grad);
                        if armijo || t_norm < g_norm {
                            std::mem::swap(&mut u, &mut trial);
                            std::mem::swap(&mut grad, &mut trial_grad);
                            energy = e_trial;
                            g_norm = t_norm;
                            report.energy_trace.push(energy);
                            accepted = true;
                            // full steps relax the shift, short ones stiffen it
                            shift = match halving {
                                0 => shift / 4.0,
                                1 => shift,
                                _ => (2.0 * shift).max(1e-3 / params.k),
                            };
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            report.final_gradient_norm = g_norm;
            return Err(Error::Stagnation(report));
        }
    }
    report.final_gradient_norm = g_norm;
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok((Field::from_vec(problem.grid, u), report))
}

/// One minimization time step from `u_prev`, using `u_prev` as the guess and
/// the functional selected in `p`.
pub fn step_minimization(u_prev: &Field, p: &StepParams, tol: f64) -> Result<Field> {
    minimize_functional(p.functional, u_prev, u_prev, p, tol).map(|(u, _)| u)
}

/// One level of a multilevel schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub h: f64,
    pub eps: f64,
}

/// Coarse-to-fine sequence of (spacing, interaction length) pairs; the last
/// entry is the target discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilevelSchedule {
    pub levels: Vec<Level>,
}

impl MultilevelSchedule {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        let s = Self { levels };
        s.validate()?;
        Ok(s)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(h, eps)| Level { h, eps }).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidParameter("multilevel schedule is empty".into()));
        }
        for l in &self.levels {
            if !(l.h > 0.0) || !(l.eps > 0.0) {
                return Err(Error::InvalidParameter(format!("level needs h > 0 and eps > 0, got {l:?}")));
            }
        }
        if self.levels.windows(2).any(|w| !(w[1].h < w[0].h)) {
            return Err(Error::InvalidParameter("schedule spacings must strictly decrease".into()));
        }
        Ok(())
    }

    pub fn target(&self) -> Level {
        *self.levels.last().expect("validated schedule is nonempty")
    }

    /// Grid of each level over the box of `target_grid`; the last level is
    /// `target_grid` itself.
    pub fn grids(&self, target_grid: &GridSpec) -> Result<Vec<GridSpec>> {
        let last = self.levels.len() - 1;
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| if i == last { Ok(*target_grid) } else { target_grid.with_spacing(l.h) })
            .collect()
    }
}

/// Per-level outcome of [`multilevel_step_with_reports`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub eps: f64,
    pub convex: bool,
    pub report: MinimizeReport,
}

fn move_to(field: &Field, grid: &GridSpec) -> Result<Field> {
    if field.grid() == grid {
        Ok(field.clone())
    } else if field.grid().n() > grid.n() {
        restrict(field, grid)
    } else {
        prolongate(field, grid)
    }
}

/// One time step of the coarse-to-fine multilevel algorithm.
///
/// Level `l` minimizes the plain step functional with interaction length
/// `eps_l` on the grid of spacing `h_l`, anchored at `u_prev_fine` sampled on
/// that grid. The first level starts from `guess` (moved to its grid), every
/// later level from the bilinear prolongation of the previous minimizer.
pub fn multilevel_step(
    u_prev_fine: &Field,
    guess: &Field,
    schedule: &MultilevelSchedule,
    p: &StepParams,
    tol: f64,
) -> Result<Field> {
    multilevel_step_with_reports(u_prev_fine, guess, schedule, p, tol).map(|(u, _)| u)
}

pub fn multilevel_step_with_reports(
    u_prev_fine: &Field,
    guess: &Field,
    schedule: &MultilevelSchedule,
    p: &StepParams,
    tol: f64,
) -> Result<(Field, Vec<LevelReport>)> {
    schedule.validate()?;
    p.validate()?;
    let target = *u_prev_fine.grid();
    let last = schedule.target();
    if target.with_spacing(last.h)? != target {
        return Err(Error::InvalidParameter(format!(
            "last level spacing {} does not match the target grid (h = {})",
            last.h,
            target.h()
        )));
    }
    if (last.eps - p.eps).abs() > 1e-12 * p.eps {
        return Err(Error::InvalidParameter(format!(
            "last level eps {} differs from the target eps {}",
            last.eps, p.eps
        )));
    }
    let grids = schedule.grids(&target)?;
    if grids.windows(2).any(|w| w[1].n() <= w[0].n()) {
        return Err(Error::InvalidParameter("level grids must get strictly finer".into()));
    }

    let mut reports = Vec::with_capacity(grids.len());
    let mut current = move_to(guess, &grids[0])?;
    for (index, (level, grid)) in schedule.levels.iter().zip(&grids).enumerate() {
        if index > 0 {
            current = prolongate(&current, grid)?;
        }
        let u_prev = move_to(u_prev_fine, grid)?;
        let params = StepParams { eps: level.eps, functional: Functional::Plain, delta: 0.0, ..*p };
        if index == 0 && !params.is_convex_step() {
            log::warn!(
                "coarsest multilevel level is not convex: k = {:e} > eps^2 = {:e}",
                params.k,
                level.eps * level.eps
            );
        }
        let (u, report) = minimize_functional(Functional::Plain, &current, &u_prev, &params, tol)
            .map_err(|e| e.at_level(index))?;
        reports.push(LevelReport { n: grid.n(), eps: level.eps, convex: params.is_convex_step(), report });
        current = u;
    }
    Ok((current, reports))
}

/// [`Stepper`] for minimization time stepping; the first step may start
/// from a supplied guess instead of the previous state.
#[derive(Debug, Clone)]
pub struct MinimizationStepper {
    pub params: StepParams,
    pub tol: f64,
    pub first_guess: Option<Field>,
    stats: SolveStats,
}

impl MinimizationStepper {
    pub fn new(params: StepParams, tol: f64, first_guess: Option<Field>) -> Self {
        Self { params, tol, first_guess, stats: SolveStats::default() }
    }
}

impl Stepper for MinimizationStepper {
    fn step(&mut self, _step_index: usize, u_prev: &Field) -> Result<Field> {
        let guess = self.first_guess.take().unwrap_or_else(|| u_prev.clone());
        let (u, report) = minimize_functional(self.params.functional, &guess, u_prev, &self.params, self.tol)?;
        self.stats.accumulate(&SolveStats {
            newton_iterations: report.outer_iterations,
            linear_iterations: report.linear_iterations,
            final_residual: report.final_gradient_norm,
        });
        Ok(u)
    }

    fn stats(&self) -> SolveStats {
        self.stats
    }
}

/// [`Stepper`] running [`multilevel_step`] every step.
#[derive(Debug, Clone)]
pub struct MultilevelStepper {
    pub schedule: MultilevelSchedule,
    pub params: StepParams,
    pub tol: f64,
    pub first_guess: Option<Field>,
    stats: SolveStats,
}

impl MultilevelStepper {
    pub fn new(schedule: MultilevelSchedule, params: StepParams, tol: f64, first_guess: Option<Field>) -> Self {
        Self { schedule, params, tol, first_guess, stats: SolveStats::default() }
    }
}

impl Stepper for MultilevelStepper {
    fn step(&mut self, _step_index: usize, u_prev: &Field) -> Result<Field> {
        let guess = self.first_guess.take().unwrap_or_else(|| u_prev.clone());
        let (u, reports) = multilevel_step_with_reports(u_prev, &guess, &self.schedule, &self.params, self.tol)?;
        for r in &reports {
            self.stats.accumulate(&SolveStats {
                newton_iterations: r.report.outer_iterations,
                linear_iterations: r.report.linear_iterations,
                final_residual: r.report.final_gradient_norm,
            });
        }
        Ok(u)
    }

    fn stats(&self) -> SolveStats {
        self.stats
    }
}

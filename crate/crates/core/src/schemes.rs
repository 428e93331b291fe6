//! One-step maps for the fully implicit, convex splitting, semi-implicit and
//! modified Crank–Nicolson discretizations of the Allen–Cahn equation, and
//! the evolution driver shared by every phase-field method.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::discretization::{
    laplacian_into, lumped_dot, solve_shifted, CgFailure, Field, GridSpec, LinearSolveReport,
};
use crate::energy::{double_well, j_eps, StepParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    /// Backward Euler in every term.
    Fis,
    /// Implicit `u³`, explicit `-u`.
    ConvexSplitting,
    /// Implicit diffusion, explicit reaction: one linear solve per step.
    SemiImplicit,
    /// Averaged diffusion with the difference-quotient potential term.
    ModifiedCn,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] =
        [SchemeId::Fis, SchemeId::ConvexSplitting, SchemeId::SemiImplicit, SchemeId::ModifiedCn];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::Fis => "fis",
            SchemeId::ConvexSplitting => "convex_splitting",
            SchemeId::SemiImplicit => "semi_implicit",
            SchemeId::ModifiedCn => "modified_cn",
        }
    }
}

/// Damped Newton settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Residual tolerance in the lumped norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Step reduction factor of the backtracking line search.
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Relative tolerance of the inner conjugate-gradient solves.
    pub linear_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, backtrack: 0.5, max_halvings: 30, linear_tol: 1e-10 }
    }
}

impl NewtonConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("newton needs tol > 0 and max_iter >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtracking factor must lie in (0, 1)".into()));
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::InvalidParameter("linear tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Work done by one nonlinear solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub final_residual: f64,
}

impl SolveStats {
    pub fn accumulate(&mut self, other: &SolveStats) {
        self.newton_iterations += other.newton_iterations;
        self.linear_iterations += other.linear_iterations;
        self.final_residual = other.final_residual;
    }
}

/// Threshold below which the difference quotient falls back to `u³ - u`.
pub const CN_QUOTIENT_FALLBACK: f64 = 1e-12;

/// `(F(u) - F(v)) / (u - v)`, or `f(u)` when `|u - v|` is below
/// [`CN_QUOTIENT_FALLBACK`].
#[inline]
pub fn cn_quotient(u: f64, v: f64) -> f64 {
    let diff = u - v;
    if diff.abs() < CN_QUOTIENT_FALLBACK {
        double_well(u).1
    } else {
        (double_well(u).0 - double_well(v).0) / diff
    }
}

/// `∂/∂u` of the quotient; `F` is quartic so the quotient is the cubic
/// `¼(u + v)(u² + v² - 2)`.
#[inline]
fn cn_quotient_du(u: f64, v: f64) -> f64 {
    0.25 * (3.0 * u * u + 2.0 * u * v + v * v - 2.0)
}

fn scheme_residual_into(
    id: SchemeId,
    grid: &GridSpec,
    u: &[f64],
    v: &[f64],
    p: &StepParams,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let inv_k = 1.0 / p.k;
    let a = p.inv_eps2();
    laplacian_into(grid, u, out);
    match id {
        SchemeId::Fis => {
            for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
                *o = (ui - vi) * inv_k - *o + a * ui * (ui * ui - 1.0);
            }
        }
        SchemeId::ConvexSplitting => {
            for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
                *o = (ui - vi) * inv_k - *o + a * (ui * ui * ui - vi);
            }
        }
        SchemeId::SemiImplicit => {
            for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
                *o = (ui - vi) * inv_k - *o + a * vi * (vi * vi - 1.0);
            }
        }
        SchemeId::ModifiedCn => {
            laplacian_into(grid, v, scratch);
            for (((o, &ui), &vi), &lv) in out.iter_mut().zip(u).zip(v).zip(scratch.iter()) {
                *o = (ui - vi) * inv_k - 0.5 * (*o + lv) + a * cn_quotient(ui, vi);
            }
        }
    }
}

/// Nodal residual of scheme `id` at `u` given the previous state, as a
/// lumped-L² Riesz representative.
pub fn scheme_residual(id: SchemeId, u: &Field, u_prev: &Field, p: &StepParams) -> Result<Field> {
    u.check_same_grid(u_prev)?;
    let len = u.values().len();
    let mut scratch = vec![0.0; len];
    let mut out = vec![0.0; len];
    scheme_residual_into(id, u.grid(), u.values(), u_prev.values(), p, &mut scratch, &mut out);
    Ok(Field::from_vec(*u.grid(), out))
}

fn jacobian_parts(id: SchemeId, u: &[f64], v: &[f64], p: &StepParams) -> (Vec<f64>, f64) {
    let inv_k = 1.0 / p.k;
    let a = p.inv_eps2();
    match id {
        SchemeId::Fis => (u.iter().map(|&x| inv_k + a * (3.0 * x * x - 1.0)).collect(), 1.0),
        SchemeId::ConvexSplitting => (u.iter().map(|&x| inv_k + 3.0 * a * x * x).collect(), 1.0),
        SchemeId::SemiImplicit => (vec![inv_k; u.len()], 1.0),
        SchemeId::ModifiedCn => (
            u.iter().zip(v).map(|(&x, &y)| inv_k + a * cn_quotient_du(x, y)).collect(),
            0.5,
        ),
    }
}

/// Solves `(diag(d) - beta Δ_h) x = rhs`, adding a Levenberg shift to the
/// diagonal whenever conjugate gradients meets negative curvature.
pub(crate) fn solve_newton_system(
    grid: &GridSpec,
    mut diag: Vec<f64>,
    beta: f64,
    rhs: &[f64],
    linear_tol: f64,
    base_shift: f64,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let cap = 10 * (grid.n() + 1);
    let mut shift = 0.0;
    let mut spent = 0;
    loop {
        match solve_shifted(grid, &diag, beta, rhs, None, linear_tol, cap) {
            Ok((x, mut report)) => {
                report.iterations += spent;
                return Ok((x, report));
            }
            Err(CgFailure::NotConverged(mut report)) => {
                report.iterations += spent;
                return Err(Error::LinearSolve(report));
            }
            Err(CgFailure::Indefinite { iterations }) => {
                spent += iterations;
                let next = if shift == 0.0 { base_shift } else { shift * 100.0 };
                log::debug!("indefinite newton system, shifting diagonal by {next:e}");
                for d in diag.iter_mut() {
                    *d += next - shift;
                }
                shift = next;
                if !shift.is_finite() || shift > 1e30 {
                    return Err(Error::LinearSolve(LinearSolveReport {
                        iterations: spent,
                        final_residual: f64::NAN,
                    }));
                }
            }
        }
    }
}

fn check_finite(u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Advances `u_prev` by one step of scheme `id`; `p.delta` and
/// `p.functional` are ignored.
pub fn step_scheme(id: SchemeId, u_prev: &Field, p: &StepParams, cfg: &NewtonConfig) -> Result<Field> {
    step_scheme_with_stats(id, u_prev, p, cfg).map(|(u, _)| u)
}

pub fn step_scheme_with_stats(
    id: SchemeId,
    u_prev: &Field,
    p: &StepParams,
    cfg: &NewtonConfig,
) -> Result<(Field, SolveStats)> {
    p.validate()?;
    cfg.validate()?;
    let grid = *u_prev.grid();
    let v = u_prev.values();
    let len = v.len();
    let mut scratch = vec![0.0; len];
    let mut res = vec![0.0; len];
    let norm = |r: &[f64]| lumped_dot(&grid, r, r).sqrt();

    if id == SchemeId::SemiImplicit {
        let inv_k = 1.0 / p.k;
        let a = p.inv_eps2();
        let rhs: Vec<f64> = v.iter().map(|&x| x * inv_k - a * x * (x * x - 1.0)).collect();
        let rhs_norm = norm(&rhs);
        let tol = if rhs_norm > 0.0 { cfg.linear_tol.min(0.5 * cfg.tol / rhs_norm) } else { cfg.linear_tol };
        let diag = vec![inv_k; len];
        let cap = 10 * (grid.n() + 1);
        let (u, report) = match solve_shifted(&grid, &diag, 1.0, &rhs, Some(v), tol, cap) {
            Ok(ok) => ok,
            Err(CgFailure::NotConverged(r)) => return Err(Error::LinearSolve(r)),
            Err(CgFailure::Indefinite { iterations }) => {
                return Err(Error::LinearSolve(LinearSolveReport { iterations, final_residual: f64::NAN }))
            }
        };
        check_finite(&u)?;
        scheme_residual_into(id, &grid, &u, v, p, &mut scratch, &mut res);
        let stats = SolveStats {
            newton_iterations: 0,
            linear_iterations: report.iterations,
            final_residual: norm(&res),
        };
        return Ok((Field::from_vec(grid, u), stats));
    }

    let mut u = v.to_vec();
    let mut trial = vec![0.0; len];
    let mut trial_res = vec![0.0; len];
    scheme_residual_into(id, &grid, &u, v, p, &mut scratch, &mut res);
    let mut r_norm = norm(&res);
    let mut stats = SolveStats::default();
    let base_shift = 1e-8 / p.k;

    for iteration in 0..cfg.max_iter {
        if r_norm <= cfg.tol {
            stats.final_residual = r_norm;
            return Ok((Field::from_vec(grid, u), stats));
        }
        stats.newton_iterations = iteration + 1;
        let (diag, beta) = jacobian_parts(id, &u, v, p);
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let (dir, report) = solve_newton_system(&grid, diag, beta, &neg_res, cfg.linear_tol, base_shift)?;
        stats.linear_iterations += report.iterations;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            for ((t, &ui), &di) in trial.iter_mut().zip(&u).zip(&dir) {
                *t = ui + alpha * di;
            }
            scheme_residual_into(id, &grid, &trial, v, p, &mut scratch, &mut trial_res);
            let t_norm = norm(&trial_res);
            if t_norm.is_finite() && t_norm * t_norm <= (1.0 - 1e-4 * alpha) * r_norm * r_norm {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut res, &mut trial_res);
                r_norm = t_norm;
                accepted = true;
                break;
            }
            alpha *= cfg.backtrack;
        }
        check_finite(&u)?;
        if !accepted {
            return Err(Error::NewtonStalled { iterations: iteration + 1, residual: r_norm });
        }
    }
    if r_norm <= cfg.tol {
        stats.final_residual = r_norm;
        return Ok((Field::from_vec(grid, u), stats));
    }
    Err(Error::NewtonDiverged { iterations: cfg.max_iter, residual: r_norm })
}

/// Anything that advances a phase field by one time step.
pub trait Stepper {
    fn step(&mut self, step_index: usize, u_prev: &Field) -> Result<Field>;

    /// Cumulative solver work, if tracked.
    fn stats(&self) -> SolveStats {
        SolveStats::default()
    }
}

/// [`Stepper`] for one of the classical schemes.
#[derive(Debug, Clone)]
pub struct SchemeStepper {
    pub id: SchemeId,
    pub params: StepParams,
    pub newton: NewtonConfig,
    stats: SolveStats,
}

impl SchemeStepper {
    pub fn new(id: SchemeId, params: StepParams, newton: NewtonConfig) -> Self {
        Self { id, params, newton, stats: SolveStats::default() }
    }
}

impl Stepper for SchemeStepper {
    fn step(&mut self, _step_index: usize, u_prev: &Field) -> Result<Field> {
        let (u, stats) = step_scheme_with_stats(self.id, u_prev, &self.params, &self.newton)?;
        self.stats.accumulate(&stats);
        Ok(u)
    }

    fn stats(&self) -> SolveStats {
        self.stats
    }
}

/// Time series produced by [`evolve`].
#[derive(Debug, Clone, Default)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    /// `J_eps` at each entry of `times`.
    pub energies: Vec<f64>,
    pub snapshots: Vec<(f64, Field)>,
    /// Time at which the field became uniform within 1e-10 of ±1.
    pub vanished_at: Option<f64>,
    /// The observer asked to stop before `t_end`.
    pub stopped_by_observer: bool,
    pub final_field: Option<Field>,
}

/// What the observer sees after every step (and once at `t = 0`).
pub struct StepView<'a> {
    pub step: usize,
    pub time: f64,
    pub field: &'a Field,
    pub energy: f64,
}

/// Uniform-within tolerance used to detect a vanished phase.
pub const VANISH_TOL: f64 = 1e-10;

pub fn is_vanished(u: &Field) -> bool {
    u.is_uniform_near(1.0, VANISH_TOL) || u.is_uniform_near(-1.0, VANISH_TOL)
}

/// Step indices at which snapshots are taken.
pub(crate) fn snapshot_steps(snapshot_times: &[f64], k: f64, t_end: f64) -> Result<Vec<usize>> {
    let mut steps = Vec::with_capacity(snapshot_times.len());
    for &s in snapshot_times {
        if !(s >= 0.0) || s > t_end + 0.5 * k {
            return Err(Error::InvalidParameter(format!("snapshot time {s} outside [0, {t_end}]")));
        }
        steps.push((s / k).round() as usize);
    }
    Ok(steps)
}

pub(crate) fn step_count(t_end: f64, k: f64) -> Result<usize> {
    if !(t_end > 0.0) || !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("need t_end > 0 and k > 0, got {t_end}, {k}")));
    }
    Ok((t_end / k - 1e-9).ceil().max(1.0) as usize)
}

/// Runs `stepper` from `u0` to `t_end`, recording `J_eps` after every step.
///
/// Stops early when the field is uniform (the phase vanished) or when the
/// observer returns `Break`.
pub fn evolve<S: Stepper + ?Sized>(
    stepper: &mut S,
    u0: &Field,
    eps: f64,
    k: f64,
    t_end: f64,
    snapshot_times: &[f64],
    mut observer: impl FnMut(&StepView<'_>) -> ControlFlow<()>,
) -> Result<EvolutionRecord> {
    let steps = step_count(t_end, k)?;
    let snaps = snapshot_steps(snapshot_times, k, t_end)?;
    let mut record = EvolutionRecord::default();
    let mut u = u0.clone();

    let mut visit = |n: usize, u: &Field, record: &mut EvolutionRecord| -> ControlFlow<()> {
        let time = n as f64 * k;
        let energy = j_eps(u, eps);
        record.times.push(time);
        record.energies.push(energy);
        if snaps.contains(&n) {
            record.snapshots.push((time, u.clone()));
        }
        let flow = observer(&StepView { step: n, time, field: u, energy });
        if flow.is_break() {
            record.stopped_by_observer = true;
            return flow;
        }
        if is_vanished(u) {
            record.vanished_at = Some(time);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    };

    if visit(0, &u, &mut record).is_continue() {
        for n in 1..=steps {
            u = stepper.step(n, &u).map_err(|e| e.at_step(n))?;
            if visit(n, &u, &mut record).is_break() {
                break;
            }
        }
    }
    record.final_field = Some(u);
    Ok(record)
}

/// Evolves `u0` with scheme `id` and records snapshots at `snapshot_times`.
pub fn run_evolution(
    id: SchemeId,
    u0: &Field,
    p: &StepParams,
    t_end: f64,
    cfg: &NewtonConfig,
    snapshot_times: &[f64],
) -> Result<EvolutionRecord> {
    let mut stepper = SchemeStepper::new(id, *p, *cfg);
    evolve(&mut stepper, u0, p.eps, p.k, t_end, snapshot_times, |_| ControlFlow::Continue(()))
}

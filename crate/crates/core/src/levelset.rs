//! Explicit finite-difference solver for the level-set form of mean curvature
//! flow, `ω_t = Δω - (D²ω ∇ω · ∇ω) / |∇ω|²`.
//!
//! Used as the sharp-interface reference for topology outcomes. There is no
//! reinitialization, so runs should stay short.

use std::ops::ControlFlow;

use crate::discretization::{Field, GridSpec};
use crate::error::{Error, Result};
use crate::schemes::{snapshot_steps, step_count};

/// Relative regularization of `|∇ω|²`, scaled by `max|ω₀|²`.
pub const REG_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub omega: Field,
    pub time: f64,
}

impl LevelSetState {
    pub fn new(omega: Field, time: f64) -> Self {
        Self { omega, time }
    }

    /// Zero level set is empty: every node has the same strict sign.
    pub fn is_vanished(&self) -> bool {
        zero_set_empty(&self.omega)
    }
}

pub(crate) fn zero_set_empty(omega: &Field) -> bool {
    let v = omega.values();
    v.iter().all(|&w| w > 0.0) || v.iter().all(|&w| w < 0.0)
}

/// Largest stable step for grid `grid`: `h²/4`.
pub fn stability_bound(grid: &GridSpec) -> f64 {
    0.25 * grid.h() * grid.h()
}

/// Default regularization for a run starting from `omega0`.
pub fn default_regularization(omega0: &Field) -> f64 {
    let m = omega0.max_abs();
    if m > 0.0 {
        REG_FACTOR * m * m
    } else {
        REG_FACTOR
    }
}

fn check_step(grid: &GridSpec, k: f64) -> Result<()> {
    let bound = stability_bound(grid);
    if !(k > 0.0) || k > bound * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "level-set step {k} violates 0 < k <= h²/4 = {bound}"
        )));
    }
    Ok(())
}

fn step_into(grid: &GridSpec, w: &[f64], k: f64, reg: f64, out: &mut [f64]) {
    let m = grid.nodes_per_side();
    let h = grid.h();
    let inv_2h = 0.5 / h;
    let inv_h2 = 1.0 / (h * h);
    let inv_4h2 = 0.25 * inv_h2;
    // mirror ghosts: index -1 maps to 1, index m maps to m - 2
    let lo = |i: usize| if i == 0 { 1 } else { i - 1 };
    let hi = |i: usize| if i + 1 == m { m - 2 } else { i + 1 };
    for j in 0..m {
        let (jm, jp) = (lo(j), hi(j));
        for i in 0..m {
            let (im, ip) = (lo(i), hi(i));
            let c = w[j * m + i];
            let e = w[j * m + ip];
            let west = w[j * m + im];
            let n = w[jp * m + i];
            let s = w[jm * m + i];
            let wx = (e - west) * inv_2h;
            let wy = (n - s) * inv_2h;
            let wxx = (e - 2.0 * c + west) * inv_h2;
            let wyy = (n - 2.0 * c + s) * inv_h2;
            let wxy = (w[jp * m + ip] - w[jm * m + ip] - w[jp * m + im] + w[jm * m + im]) * inv_4h2;
            let grad2 = wx * wx + wy * wy;
            let normal = (wx * wx * wxx + 2.0 * wx * wy * wxy + wy * wy * wyy) / (grad2 + reg);
            out[j * m + i] = c + k * (wxx + wyy - normal);
        }
    }
}

/// One forward-Euler step with central differences and mirror closure.
pub fn ls_step(state: &LevelSetState, k: f64, reg: f64) -> Result<LevelSetState> {
    let grid = *state.omega.grid();
    if grid.n() < 2 {
        return Err(Error::InvalidGrid("level-set stencil needs at least two cells".into()));
    }
    check_step(&grid, k)?;
    if !(reg > 0.0) {
        return Err(Error::InvalidParameter(format!("regularization must be positive, got {reg}")));
    }
    let mut out = vec![0.0; grid.node_count()];
    step_into(&grid, state.omega.values(), k, reg, &mut out);
    let omega = Field::new(grid, out)?;
    Ok(LevelSetState { omega, time: state.time + k })
}

/// Output of [`ls_run`].
#[derive(Debug, Clone, Default)]
pub struct LevelSetRun {
    pub snapshots: Vec<LevelSetState>,
    /// Time at which the zero set became empty.
    pub vanished_at: Option<f64>,
    pub stopped_by_observer: bool,
    pub final_state: Option<LevelSetState>,
}

/// Evolves `omega0` to `t_end`, keeping states at `snapshot_times`.
pub fn ls_run(omega0: &Field, k: f64, t_end: f64, snapshot_times: &[f64]) -> Result<LevelSetRun> {
    ls_run_with(omega0, k, t_end, snapshot_times, |_| ControlFlow::Continue(()))
}

/// [`ls_run`] with an observer called at `t = 0` and after every step.
///
/// Stops early when the zero set vanishes or the observer breaks.
pub fn ls_run_with(
    omega0: &Field,
    k: f64,
    t_end: f64,
    snapshot_times: &[f64],
    mut observer: impl FnMut(&LevelSetState) -> ControlFlow<()>,
) -> Result<LevelSetRun> {
    let grid = *omega0.grid();
    if grid.n() < 2 {
        return Err(Error::InvalidGrid("level-set stencil needs at least two cells".into()));
    }
    check_step(&grid, k)?;
    let steps = step_count(t_end, k)?;
    let snaps = snapshot_steps(snapshot_times, k, t_end)?;
    let reg = default_regularization(omega0);

    let mut run = LevelSetRun::default();
    let mut state = LevelSetState::new(omega0.clone(), 0.0);
    let mut scratch = vec![0.0; grid.node_count()];
    for n in 0..=steps {
        if n > 0 {
            step_into(&grid, state.omega.values(), k, reg, &mut scratch);
            if let Some(bad) = scratch.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(bad).at_step(n));
            }
            let next = Field::new(grid, std::mem::take(&mut scratch))?;
            scratch = std::mem::replace(&mut state.omega, next).into_values();
            state.time = n as f64 * k;
        }
        if snaps.contains(&n) {
            run.snapshots.push(state.clone());
        }
        if observer(&state).is_break() {
            run.stopped_by_observer = true;
            break;
        }
        if state.is_vanished() {
            run.vanished_at = Some(state.time);
            break;
        }
    }
    run.final_state = Some(state);
    Ok(run)
}

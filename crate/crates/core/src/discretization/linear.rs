use serde::{Deserialize, Serialize};

use super::{laplacian_into, lumped_weights, Field, GridSpec};
use crate::error::{Error, Result};

/// Outcome of a conjugate-gradient solve. `final_residual` is relative to
/// the lumped norm of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveReport {
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum CgFailure {
    /// Non-positive curvature `(p, A p) <= 0` was met.
    Indefinite { iterations: usize },
    NotConverged(LinearSolveReport),
}

pub(crate) fn default_iteration_cap(grid: &GridSpec) -> usize {
    10 * (grid.n() + 1)
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Solves `(diag(d) - beta Δ_h) x = rhs` by Jacobi-preconditioned CG in the
/// lumped inner product, in which the operator is self-adjoint.
pub(crate) fn solve_shifted(
    grid: &GridSpec,
    diag: &[f64],
    beta: f64,
    rhs: &[f64],
    initial: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(Vec<f64>, LinearSolveReport), CgFailure> {
    let len = grid.node_count();
    let w = lumped_weights(grid);
    let stencil_diag = 4.0 * beta / (grid.h() * grid.h());
    let inv_precond: Vec<f64> = diag
        .iter()
        .map(|&d| {
            let p = d + stencil_diag;
            if p > 0.0 { 1.0 / p } else { 1.0 }
        })
        .collect();

    let apply = |x: &[f64], out: &mut [f64]| {
        laplacian_into(grid, x, out);
        for ((o, &xi), &di) in out.iter_mut().zip(x).zip(diag) {
            *o = di * xi - beta * *o;
        }
    };

    let b_norm = wdot(&w, rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; len], LinearSolveReport { iterations: 0, final_residual: 0.0 }));
    }

    let mut x = match initial {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; len],
    };
    let mut ap = vec![0.0; len];
    let mut r = rhs.to_vec();
    if initial.is_some() {
        apply(&x, &mut ap);
        for (ri, a) in r.iter_mut().zip(&ap) {
            *ri -= a;
        }
    }
    let mut r_norm = wdot(&w, &r, &r).sqrt();
    if r_norm <= tol * b_norm {
        return Ok((x, LinearSolveReport { iterations: 0, final_residual: r_norm / b_norm }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_precond).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = wdot(&w, &r, &z);

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let curvature = wdot(&w, &p, &ap);
        if !(curvature > 0.0) {
            return Err(CgFailure::Indefinite { iterations: it });
        }
        let alpha = rz / curvature;
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        r_norm = wdot(&w, &r, &r).sqrt();
        if r_norm <= tol * b_norm {
            return Ok((x, LinearSolveReport { iterations: it, final_residual: r_norm / b_norm }));
        }
        for ((zi, ri), mi) in z.iter_mut().zip(&r).zip(&inv_precond) {
            *zi = ri * mi;
        }
        let rz_next = wdot(&w, &r, &z);
        let ratio = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + ratio * *pi;
        }
    }
    Err(CgFailure::NotConverged(LinearSolveReport {
        iterations: max_iter,
        final_residual: r_norm / b_norm,
    }))
}

/// Solves `(alpha I - beta Δ_h) u = rhs` with Neumann closure.
///
/// The returned field satisfies `|rhs - A u| <= tol * |rhs|` in the lumped
/// norm. Hitting the iteration cap of `10 (n + 1)` is an error carrying the
/// last report.
pub fn solve_screened_poisson(
    alpha: f64,
    beta: f64,
    rhs: &Field,
    tol: f64,
) -> Result<(Field, LinearSolveReport)> {
    if !(alpha > 0.0) || !(beta >= 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "screened Poisson needs alpha > 0, beta >= 0, tol > 0 (got {alpha}, {beta}, {tol})"
        )));
    }
    let grid = *rhs.grid();
    let diag = vec![alpha; grid.node_count()];
    match solve_shifted(&grid, &diag, beta, rhs.values(), None, tol, default_iteration_cap(&grid)) {
        Ok((u, report)) => Ok((Field::new(grid, u)?, report)),
        Err(CgFailure::NotConverged(report)) => Err(Error::LinearSolve(report)),
        Err(CgFailure::Indefinite { iterations }) => Err(Error::LinearSolve(LinearSolveReport {
            iterations,
            final_residual: f64::NAN,
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{apply_neumann_laplacian, lumped_norm};
    use std::f64::consts::PI;

    fn residual(alpha: f64, beta: f64, u: &Field, rhs: &Field) -> f64 {
        let lap = apply_neumann_laplacian(u);
        let r: Vec<f64> = rhs
            .values()
            .iter()
            .zip(u.values())
            .zip(lap.values())
            .map(|((b, u), l)| b - (alpha * u - beta * l))
            .collect();
        lumped_norm(&Field::new(*u.grid(), r).unwrap())
    }

    #[test]
    fn identity_system() {
        let g = GridSpec::unit_box(10).unwrap();
        let rhs = Field::constant(g, 5.0);
        let (u, _) = solve_screened_poisson(1.0, 0.0, &rhs, 1e-10).unwrap();
        assert!(u.is_uniform_near(5.0, 1e-12));
    }

    #[test]
    fn constant_rhs_is_reproduced() {
        let g = GridSpec::unit_box(20).unwrap();
        let rhs = Field::constant(g, 2.0);
        let (u, report) = solve_screened_poisson(1.0, 1.0, &rhs, 1e-10).unwrap();
        assert!(u.is_uniform_near(2.0, 1e-10));
        assert!(report.final_residual <= 1e-10);
    }

    #[test]
    fn manufactured_cosine_solution() {
        let g = GridSpec::unit_box(128).unwrap();
        let exact = |x: f64, y: f64| (2.0 * PI * x).cos() * (2.0 * PI * y).cos();
        let rhs = Field::from_fn(g, |x, y| (1.0 + 8.0 * PI * PI) * exact(x, y)).unwrap();
        let (u, report) = solve_screened_poisson(1.0, 1.0, &rhs, 1e-10).unwrap();
        let reference = Field::from_fn(g, exact).unwrap();
        let err = u.max_abs_diff(&reference).unwrap();
        let h = g.h();
        // truncation error of the five-point stencil: (h²/12)(u_xxxx + u_yyyy)
        let bound = 1.1 * 2.0 * (2.0 * PI).powi(4) * h * h / 12.0 / (1.0 + 8.0 * PI * PI);
        assert!(err <= bound, "max error {err} above {bound}");
        assert!(report.final_residual <= 1e-10);
        assert!(residual(1.0, 1.0, &u, &rhs) <= 1e-10 * lumped_norm(&rhs) * 1.0001);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = GridSpec::unit_box(5).unwrap();
        let (u, report) = solve_screened_poisson(3.0, 1.0, &Field::constant(g, 0.0), 1e-10).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let rhs = Field::constant(GridSpec::unit_box(4).unwrap(), 1.0);
        assert!(solve_screened_poisson(0.0, 1.0, &rhs, 1e-10).is_err());
        assert!(solve_screened_poisson(1.0, -1.0, &rhs, 1e-10).is_err());
        assert!(solve_screened_poisson(1.0, 1.0, &rhs, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = GridSpec::unit_box(64).unwrap();
        let rhs = Field::from_fn(g, |x, y| (7.0 * x).sin() + y * y).unwrap();
        let diag = vec![1e-6; g.node_count()];
        match solve_shifted(&g, &diag, 1.0, rhs.values(), None, 1e-14, 3) {
            Err(CgFailure::NotConverged(report)) => assert_eq!(report.iterations, 3),
            other => panic!("expected iteration cap, got {other:?}"),
        }
    }

    #[test]
    fn detects_indefinite_operator() {
        let g = GridSpec::unit_box(8).unwrap();
        let rhs = Field::constant(g, 1.0);
        let diag = vec![-1.0; g.node_count()];
        assert!(matches!(
            solve_shifted(&g, &diag, 1.0, rhs.values(), None, 1e-10, 100),
            Err(CgFailure::Indefinite { .. })
        ));
    }
}

use super::{Field, GridSpec};
use crate::error::Result;

/// Five-point Laplacian with mirrored ghost nodes, written into `out`.
///
/// Equals `-M^{-1} K` for the lumped P1 mass `M` and stiffness `K` on the
/// two-triangle split of every cell.
pub(crate) fn laplacian_into(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    let m = grid.nodes_per_side();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    debug_assert!(u.len() == m * m && out.len() == m * m);
    for j in 0..m {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j + 1 == m { m - 2 } else { j + 1 };
        let row = &u[j * m..(j + 1) * m];
        let below = &u[jm * m..(jm + 1) * m];
        let above = &u[jp * m..(jp + 1) * m];
        let out_row = &mut out[j * m..(j + 1) * m];

        out_row[0] = (2.0 * row[1] + below[0] + above[0] - 4.0 * row[0]) * inv_h2;
        for i in 1..m - 1 {
            out_row[i] =
                (row[i - 1] + row[i + 1] + below[i] + above[i] - 4.0 * row[i]) * inv_h2;
        }
        let l = m - 1;
        out_row[l] = (2.0 * row[l - 1] + below[l] + above[l] - 4.0 * row[l]) * inv_h2;
    }
}

/// Trapezoidal (lumped-mass) node weights: `h^2` times ¼, ½ or 1.
pub(crate) fn lumped_weights(grid: &GridSpec) -> Vec<f64> {
    let m = grid.nodes_per_side();
    let h2 = grid.h() * grid.h();
    let edge = |i: usize| if i == 0 || i + 1 == m { 0.5 } else { 1.0 };
    let mut w = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            w.push(h2 * edge(i) * edge(j));
        }
    }
    w
}

/// `sum_i w_i * g(i)` with trapezoidal weights, without materializing them.
pub(crate) fn weighted_sum(grid: &GridSpec, mut g: impl FnMut(usize) -> f64) -> f64 {
    let m = grid.nodes_per_side();
    let h2 = grid.h() * grid.h();
    let mut total = 0.0;
    for j in 0..m {
        let cj = if j == 0 || j + 1 == m { 0.5 } else { 1.0 };
        let base = j * m;
        let mut row = 0.5 * (g(base) + g(base + m - 1));
        for i in 1..m - 1 {
            row += g(base + i);
        }
        total += cj * row;
    }
    h2 * total
}

pub(crate) fn lumped_dot(grid: &GridSpec, a: &[f64], b: &[f64]) -> f64 {
    weighted_sum(grid, |i| a[i] * b[i])
}

/// Discrete Laplacian `Δ_h f` under homogeneous Neumann closure.
pub fn apply_neumann_laplacian(f: &Field) -> Field {
    let mut out = vec![0.0; f.values().len()];
    laplacian_into(f.grid(), f.values(), &mut out);
    Field::from_vec(*f.grid(), out)
}

/// Mass-lumped L² inner product.
pub fn lumped_inner_product(f: &Field, g: &Field) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(lumped_dot(f.grid(), f.values(), g.values()))
}

pub fn lumped_norm(f: &Field) -> f64 {
    lumped_dot(f.grid(), f.values(), f.values()).sqrt()
}

/// `∫ ½|∇f|²` with the P1 gradient on the two-triangle split of each cell.
///
/// Each cell contributes a quarter of the squared difference along each of
/// its four edges, so this equals `-½ (Δ_h f, f)` in the lumped product.
pub fn dirichlet_energy(f: &Field) -> f64 {
    dirichlet_energy_of(f.grid(), f.values())
}

pub(crate) fn dirichlet_energy_of(grid: &GridSpec, u: &[f64]) -> f64 {
    let m = grid.nodes_per_side();
    let mut total = 0.0;
    for j in 0..m - 1 {
        let row = &u[j * m..(j + 1) * m];
        let up = &u[(j + 1) * m..(j + 2) * m];
        for i in 0..m - 1 {
            let (a, b, c, d) = (row[i], row[i + 1], up[i], up[i + 1]);
            total += (b - a).powi(2) + (c - a).powi(2) + (d - c).powi(2) + (d - b).powi(2);
        }
    }
    // the h^2 from the triangle areas cancels the 1/h^2 of the difference quotients
    0.25 * total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::unit_box(n).unwrap()
    }

    #[test]
    fn laplacian_of_constant_vanishes_everywhere() {
        let f = Field::constant(grid(7), 3.0);
        let lap = apply_neumann_laplacian(&f);
        assert!(lap.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_of_linear_vanishes_in_interior() {
        let g = grid(16);
        let f = Field::from_fn(g, |x, _| x).unwrap();
        let lap = apply_neumann_laplacian(&f);
        for j in 1..g.n() {
            for i in 1..g.n() {
                assert!(lap.at(i, j).abs() < 1e-10, "node ({i},{j}): {}", lap.at(i, j));
            }
        }
    }

    #[test]
    fn laplacian_of_parabola_is_two_in_interior() {
        for n in [8, 32, 100] {
            let g = grid(n);
            let f = Field::from_fn(g, |x, _| x * x).unwrap();
            let lap = apply_neumann_laplacian(&f);
            for j in 1..n {
                for i in 1..n {
                    assert!((lap.at(i, j) - 2.0).abs() < 1e-8 * (n * n) as f64);
                }
            }
        }
    }

    #[test]
    fn inner_product_of_ones_is_area() {
        let g = grid(10);
        let one = Field::constant(g, 1.0);
        let zero = Field::constant(g, 0.0);
        assert!((lumped_inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(lumped_inner_product(&one, &zero).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_rejects_mismatched_grids() {
        let a = Field::constant(grid(4), 1.0);
        let b = Field::constant(grid(5), 1.0);
        assert!(lumped_inner_product(&a, &b).is_err());
    }

    #[test]
    fn inner_product_of_x_squared_converges_at_second_order() {
        // trapezoid error for ∫x² over [-½,½] is h²/12 (f'(½) - f'(-½)) = h²/6
        for n in [16, 128] {
            let g = grid(n);
            let f = Field::from_fn(g, |x, _| x).unwrap();
            let value = lumped_inner_product(&f, &f).unwrap();
            let h = g.h();
            assert!((value - 1.0 / 12.0 - h * h / 6.0).abs() < 1e-14, "n {n}: {value}");
        }
    }

    #[test]
    fn dirichlet_energy_examples() {
        let g = grid(12);
        assert_eq!(dirichlet_energy(&Field::constant(g, 4.2)), 0.0);
        let fx = Field::from_fn(g, |x, _| x).unwrap();
        assert!((dirichlet_energy(&fx) - 0.5).abs() < 1e-12);
        let fxy = Field::from_fn(g, |x, y| x + y).unwrap();
        assert!((dirichlet_energy(&fxy) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_energy_matches_laplacian_form() {
        let g = grid(9);
        let f = Field::from_fn(g, |x, y| (3.0 * x).sin() * (2.0 * y + 0.3).cos() + x * y).unwrap();
        let lap = apply_neumann_laplacian(&f);
        let form = -0.5 * lumped_inner_product(&lap, &f).unwrap();
        assert!((dirichlet_energy(&f) - form).abs() < 1e-12 * form.abs().max(1.0));
    }

    #[test]
    fn weighted_sum_handles_single_cell_grid() {
        let g = grid(1);
        assert!((weighted_sum(&g, |_| 1.0) - 1.0).abs() < 1e-15);
    }
}

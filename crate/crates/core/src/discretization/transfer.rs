use super::{Field, GridSpec};
use crate::error::{Error, Result};

/// Locates fine index `i_fine` on the coarse grid as (cell, fraction), using
/// integer arithmetic so that coincident nodes land exactly on a coarse node.
fn locate(i_fine: usize, n_fine: usize, n_coarse: usize) -> (usize, f64) {
    let num = i_fine * n_coarse;
    let cell = (num / n_fine).min(n_coarse - 1);
    let frac = (num - cell * n_fine) as f64 / n_fine as f64;
    (cell, frac)
}

/// Bilinear interpolation of `coarse` at the nodes of `fine_grid`.
///
/// The grids need not be nested; they must cover the same box.
pub fn prolongate(coarse: &Field, fine_grid: &GridSpec) -> Result<Field> {
    let cg = coarse.grid();
    if !cg.same_box(fine_grid) {
        return Err(Error::GridMismatch);
    }
    let (nc, nf) = (cg.n(), fine_grid.n());
    let mc = cg.nodes_per_side();
    let c = coarse.values();
    let cols: Vec<(usize, f64)> = (0..=nf).map(|i| locate(i, nf, nc)).collect();
    let mut out = Vec::with_capacity(fine_grid.node_count());
    for jf in 0..=nf {
        let (jc, ty) = locate(jf, nf, nc);
        let lo = &c[jc * mc..(jc + 1) * mc];
        let hi = &c[(jc + 1) * mc..(jc + 2) * mc];
        for &(ic, tx) in &cols {
            let bottom = lo[ic] + tx * (lo[ic + 1] - lo[ic]);
            let top = hi[ic] + tx * (hi[ic + 1] - hi[ic]);
            out.push(bottom + ty * (top - bottom));
        }
    }
    Field::new(*fine_grid, out)
}

/// Samples `fine` at the nodes of `coarse_grid`, taking the nearest fine node.
/// For nested grids this is exact injection.
pub fn restrict(fine: &Field, coarse_grid: &GridSpec) -> Result<Field> {
    let fg = fine.grid();
    if !fg.same_box(coarse_grid) {
        return Err(Error::GridMismatch);
    }
    let (nf, nc) = (fg.n(), coarse_grid.n());
    // nearest fine index: round(i * nf / nc) in integers
    let nearest = |i: usize| (2 * i * nf + nc) / (2 * nc);
    let idx: Vec<usize> = (0..=nc).map(nearest).collect();
    let mut out = Vec::with_capacity(coarse_grid.node_count());
    for &jf in &idx {
        for &i_f in &idx {
            out.push(fine.at(i_f, jf));
        }
    }
    Ok(Field::from_vec(*coarse_grid, out))
}

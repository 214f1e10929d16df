//! Difference stencils shared by norms and energies.
//!
//! Every stencil is written so that its floating-point evaluation commutes
//! exactly with the lattice symmetries of a square grid (`hx == hy`):
//! paired terms are summed pairwise, and pairs are swapped but never split
//! by a quarter turn or a reflection.

use super::Grid;

pub(crate) fn cell_count(grid: &Grid) -> usize {
    if grid.is_1d() {
        grid.nx().saturating_sub(1)
    } else {
        grid.nx().saturating_sub(1) * grid.ny().saturating_sub(1)
    }
}

/// Corner node indices `[(i,j), (i+1,j), (i,j+1), (i+1,j+1)]` of cell `c`.
pub(crate) fn cell_corners(grid: &Grid, c: usize) -> [usize; 4] {
    let w = grid.nx() - 1;
    let (i, j) = (c % w, c / w);
    let a = grid.index(i, j);
    [a, a + 1, a + grid.nx(), a + grid.nx() + 1]
}

/// Squared cell gradient `|∇_h u|²`: the mean of the squared x-differences
/// on the two horizontal edges plus the mean of the squared y-differences
/// on the two vertical edges. In 1D, the squared difference quotient.
pub(crate) fn cell_sq_gradient(grid: &Grid, v: &[f64], c: usize) -> f64 {
    if grid.is_1d() {
        let d = (v[c + 1] - v[c]) / grid.hx();
        return d * d;
    }
    let [a, b, cc, d] = cell_corners(grid, c);
    let (hx, hy) = (grid.hx(), grid.hy());
    let x0 = (v[b] - v[a]) / hx;
    let x1 = (v[d] - v[cc]) / hx;
    let y0 = (v[cc] - v[a]) / hy;
    let y1 = (v[d] - v[b]) / hy;
    0.5 * (x0 * x0 + x1 * x1) + 0.5 * (y0 * y0 + y1 * y1)
}

pub(crate) fn cell_sq_gradients(grid: &Grid, v: &[f64]) -> Vec<f64> {
    (0..cell_count(grid))
        .map(|c| cell_sq_gradient(grid, v, c))
        .collect()
}

/// Exact change `q(new) − q(old)` of the squared cell gradient, computed
/// from the step `s = new − old` so that small steps do not cancel.
pub(crate) fn cell_sq_gradient_change(
    grid: &Grid,
    old: &[f64],
    new: &[f64],
    step: &[f64],
    c: usize,
) -> f64 {
    let edge = |a: usize, b: usize, h: f64| {
        let ds = (step[b] - step[a]) / h;
        let sum = (new[b] - new[a]) / h + (old[b] - old[a]) / h;
        ds * sum
    };
    if grid.is_1d() {
        return edge(c, c + 1, grid.hx());
    }
    let [a, b, cc, d] = cell_corners(grid, c);
    let (hx, hy) = (grid.hx(), grid.hy());
    0.5 * (edge(a, b, hx) + edge(cc, d, hx)) + 0.5 * (edge(a, cc, hy) + edge(b, d, hy))
}

/// 5-point (1D: 3-point) Laplacian over the whole lattice, zero outside.
pub(crate) fn laplacian(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let hx2 = grid.hx() * grid.hx();
    let hy2 = grid.hy() * grid.hy();
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            0.0
        } else {
            v[j as usize * nx + i as usize]
        }
    };
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            let (i, j) = (i as isize, j as isize);
            let u = v[k];
            let xs = (at(i - 1, j) + at(i + 1, j) - 2.0 * u) / hx2;
            if grid.is_1d() {
                xs
            } else {
                xs + (at(i, j - 1) + at(i, j + 1) - 2.0 * u) / hy2
            }
        })
        .collect()
}

pub(crate) fn laplacian_power(grid: &Grid, v: &[f64], m: u32) -> Vec<f64> {
    let mut out = v.to_vec();
    for _ in 0..m {
        out = laplacian(grid, &out);
    }
    out
}

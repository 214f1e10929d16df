//! Minimization over the zero-trace subspace and the
//! symmetrize-then-polish workflow.

use std::sync::Arc;

use serde::Serialize;

use crate::average::{g_average, invariance_residual, AverageReport};
use crate::energy::EnergyFunctional;
use crate::error::{invalid, Error, Result};
use crate::field::stencil::laplacian;
use crate::field::{Grid, GridFunction};
use crate::group::SymmetryGroup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Bound on the L² norm of the gradient, `(Σ_k (∂_k F)²/A)^{1/2}`.
    pub grad_tol: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
    /// Energies below this are reported as divergence.
    pub energy_floor: f64,
    /// Reserved for randomized restarts; the descent itself is deterministic.
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 5000,
            grad_tol: 1e-8,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
            energy_floor: -1e12,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(invalid(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(invalid("sufficient-decrease constant must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeResult {
    #[serde(skip)]
    pub u_min: GridFunction,
    /// `F(u_min)`, evaluated directly.
    pub energy: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    pub residual: f64,
    /// Energy after each accepted step, accumulated from accurately
    /// evaluated decrements; starts with `F(u0)`.
    pub energy_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

fn l2_residual(grad: &GridFunction) -> f64 {
    let a = grad.grid().node_area();
    (grad.values().iter().map(|g| g * g).sum::<f64>() / a).sqrt()
}

/// Gradient descent in the L² metric with a two-point (Barzilai–Borwein)
/// trial step and Armijo backtracking.
///
/// Every accepted step satisfies the sufficient-decrease condition on an
/// accurately evaluated energy change, so the recorded history is
/// nonincreasing. Stops when the residual drops below `grad_tol`, after
/// `max_iters` steps, or when backtracking can no longer find a decrease.
pub fn minimize(
    f: &EnergyFunctional,
    u0: &GridFunction,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    opts.validate()?;
    let grid = Arc::clone(u0.grid());
    let area = grid.node_area();

    let mut u = u0.clone();
    let mut energy = f.eval(&u);
    if !energy.is_finite() || energy < opts.energy_floor {
        return Err(Error::Divergence {
            iteration: 0,
            energy,
        });
    }
    let mut grad = f.gradient(&u);
    let mut residual = l2_residual(&grad);
    let mut energy_history = vec![energy];
    let mut residual_history = vec![residual];
    let mut trial = 1.0;
    let mut iterations = 0;

    while residual > opts.grad_tol && iterations < opts.max_iters {
        let direction: Vec<f64> = grad.values().iter().map(|g| -g / area).collect();
        let slope = -residual * residual;

        let mut step = trial;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let next_values: Vec<f64> = u
                .values()
                .iter()
                .zip(&direction)
                .map(|(x, d)| x + step * d)
                .collect();
            let next = GridFunction::from_raw(&grid, next_values);
            let change = f.eval_change(&u, &next)?;
            if change.is_finite() && change <= opts.sufficient_decrease * step * slope {
                accepted = Some((next, change));
                break;
            }
            step *= opts.shrink;
        }
        let Some((next, change)) = accepted else {
            break;
        };

        energy += change;
        iterations += 1;
        if !energy.is_finite() || energy < opts.energy_floor {
            return Err(Error::Divergence {
                iteration: iterations,
                energy,
            });
        }
        let next_grad = f.gradient(&next);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for k in 0..grid.len() {
            let s = next.values()[k] - u.values()[k];
            ss += s * s * area;
            sy += s * (next_grad.values()[k] - grad.values()[k]);
        }
        trial = if sy > 0.0 { ss / sy } else { 2.0 * step };
        trial = trial.clamp(1e-16, 1e16);

        u = next;
        grad = next_grad;
        residual = l2_residual(&grad);
        energy_history.push(energy);
        residual_history.push(residual);
    }

    Ok(MinimizeResult {
        energy: f.eval(&u),
        converged: residual <= opts.grad_tol,
        u_min: u,
        iterations,
        residual,
        energy_history,
        residual_history,
    })
}

/// Solve `−Δ_h u = rhs` on the interior nodes with zero boundary values,
/// by conjugate gradients to a relative residual of `1e−12`.
pub fn direct_poisson_solve(grid: &Arc<Grid>, rhs: f64) -> Result<GridFunction> {
    let n = grid.interior_count();
    if n == 0 {
        return Err(invalid("Poisson system has no interior nodes"));
    }
    if rhs == 0.0 {
        return Ok(GridFunction::zeros(grid));
    }
    let interior = grid.interior();
    let apply = |x: &[f64]| -> Vec<f64> {
        let lap = laplacian(grid, x);
        lap.iter()
            .zip(interior)
            .map(|(l, &inside)| if inside { -l } else { 0.0 })
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let b: Vec<f64> = interior
        .iter()
        .map(|&inside| if inside { rhs } else { 0.0 })
        .collect();
    let b_norm = dot(&b, &b).sqrt();
    let tol = 1e-12 * b_norm;
    let mut x = vec![0.0; grid.len()];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..20 * n + 100 {
        if rr.sqrt() <= tol {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for k in 0..p.len() {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_next;
    }
    let ax = apply(&x);
    let true_res: f64 = ax
        .iter()
        .zip(&b)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if true_res > 1e-11 * b_norm {
        return Err(invalid(format!(
            "Poisson solve stalled at relative residual {:.3e}",
            true_res / b_norm
        )));
    }
    Ok(GridFunction::from_raw(grid, x))
}

/// Output of [`symmetrize_and_polish`].
#[derive(Debug, Clone, Serialize)]
pub struct SymmetrizeOutcome {
    pub raw: MinimizeResult,
    #[serde(skip)]
    pub averaged: GridFunction,
    pub averaged_energy: f64,
    pub polished: MinimizeResult,
    pub report: AverageReport,
    /// `max_g ‖g·u − u‖_∞` of the polished minimizer.
    pub polished_invariance_residual: f64,
}

/// Relative tolerance for the invariance precondition of
/// [`symmetrize_and_polish`].
pub const INVARIANCE_TOL: f64 = 1e-10;

/// Minimize from `u0`, G-average the minimizer, then minimize again from the
/// average.
///
/// Requires `F(g·u0) = F(u0)` for all `g` within [`INVARIANCE_TOL`]
/// relative; in practice this means a lattice-preserving group.
pub fn symmetrize_and_polish(
    f: &EnergyFunctional,
    group: &SymmetryGroup,
    u0: &GridFunction,
    opts: &MinimizeOptions,
) -> Result<SymmetrizeOutcome> {
    let deviation = f.check_invariance(u0, group)?;
    let tolerance = INVARIANCE_TOL * (1.0 + f.eval(u0).abs());
    if deviation > tolerance {
        return Err(Error::NotInvariant {
            deviation,
            tolerance,
        });
    }
    let raw = minimize(f, u0, opts)?;
    let averaged = g_average(&raw.u_min, group)?;
    let report = AverageReport::compute(f, &raw.u_min, group)?;
    let polished = minimize(f, &averaged, opts)?;
    let polished_invariance_residual = invariance_residual(&polished.u_min, group)?;
    Ok(SymmetrizeOutcome {
        averaged_energy: f.eval(&averaged),
        raw,
        averaged,
        polished,
        report,
        polished_invariance_residual,
    })
}

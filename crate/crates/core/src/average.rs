//! The G-average `u_G = Σ_g w_g·(g·u)` and the inequalities behind the
//! symmetric-minimizer argument.
//!
//! With uniform Haar weights the average is a convex combination of the
//! orbit, so it stays in every closed convex set containing the orbit
//! (in particular in the zero-trace subspace), and for convex `F`
//!
//! ```text
//! F(u_G) ≤ Σ_g w_g F(g·u),
//! ```
//!
//! which equals `F(u)` when `F` is G-invariant. The same inequality follows
//! from the subgradient inequality at `u_G` because the gradient term
//! averages to zero over the orbit. Both routes are exposed: [`jensen_gap`]
//! and [`subgradient_gap`].
//!
//! For the SO(2) quadrature every statement holds exactly for the cyclic
//! group C_N; the continuous SO(2) average is only approximated.

use serde::Serialize;

use crate::energy::EnergyFunctional;
use crate::error::{invalid, Result};
use crate::field::{orbit_plans, sobolev_norm, GridFunction, SobolevOrder};
use crate::group::SymmetryGroup;

/// Tolerance (relative to `1 + |F(u)|`) for the Jensen and subgradient gaps.
pub const GAP_TOL: f64 = 1e-10;
/// Relative slack of the convex-hull norm bound.
pub const HULL_TOL: f64 = 1e-12;

/// Finite-dimensional versions of the averaging identities, over an explicit
/// orbit `{x_g}` with weights `{w_g}`.
pub mod orbit {
    use crate::sum::CompensatedSum;

    /// `Σ_g w_g x_g`, compensated per coordinate.
    pub fn weighted_mean(orbit: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
        assert_eq!(orbit.len(), weights.len());
        let n = orbit.first().map_or(0, Vec::len);
        let mut acc = vec![CompensatedSum::default(); n];
        for (x, &w) in orbit.iter().zip(weights) {
            assert_eq!(x.len(), n);
            for (a, &xi) in acc.iter_mut().zip(x) {
                a.add(w * xi);
            }
        }
        acc.into_iter().map(CompensatedSum::value).collect()
    }

    /// `Σ_g w_g F(x_g) − F(mean)`.
    pub fn jensen_gap(f: impl Fn(&[f64]) -> f64, orbit: &[Vec<f64>], weights: &[f64]) -> f64 {
        let mean = weighted_mean(orbit, weights);
        let avg: f64 = orbit.iter().zip(weights).map(|(x, w)| w * f(x)).sum();
        avg - f(&mean)
    }

    /// `min_g [F(x_g) − F(mean) − ⟨∇F(mean), x_g − mean⟩]`, where
    /// `grad` returns partial derivatives and the pairing is the plain dot
    /// product of partials with coordinates.
    pub fn subgradient_gap(
        f: impl Fn(&[f64]) -> f64,
        grad: impl Fn(&[f64]) -> Vec<f64>,
        orbit: &[Vec<f64>],
        weights: &[f64],
    ) -> f64 {
        let mean = weighted_mean(orbit, weights);
        let f_mean = f(&mean);
        let beta = grad(&mean);
        orbit
            .iter()
            .map(|x| {
                let pairing: f64 = beta
                    .iter()
                    .zip(x.iter().zip(&mean))
                    .map(|(b, (xi, mi))| b * (xi - mi))
                    .sum();
                f(x) - f_mean - pairing
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// The orbit point closest to the mean under `norm`, and its distance.
    pub fn nearest_to_mean(
        norm: impl Fn(&[f64]) -> f64,
        orbit: &[Vec<f64>],
        weights: &[f64],
    ) -> (usize, f64) {
        let mean = weighted_mean(orbit, weights);
        let mut best = (0, f64::INFINITY);
        for (g, x) in orbit.iter().enumerate() {
            let diff: Vec<f64> = x.iter().zip(&mean).map(|(a, b)| a - b).collect();
            let d = norm(&diff);
            if d < best.1 {
                best = (g, d);
            }
        }
        best
    }
}

/// The orbit `{g·u}` in group order.
pub fn orbit_of(u: &GridFunction, group: &SymmetryGroup) -> Result<Vec<GridFunction>> {
    if group.weights().len() != group.len() {
        return Err(invalid("group has mismatched weights"));
    }
    orbit_plans(group, u.grid())?
        .iter()
        .map(|plan| plan.apply(u))
        .collect()
}

fn mean_of(u: &GridFunction, orbit: &[GridFunction], group: &SymmetryGroup) -> GridFunction {
    let raw: Vec<Vec<f64>> = orbit.iter().map(|v| v.values().to_vec()).collect();
    GridFunction::from_raw(u.grid(), orbit::weighted_mean(&raw, group.weights()))
}

/// `u_G = Σ_g w_g·(g·u)`.
pub fn g_average(u: &GridFunction, group: &SymmetryGroup) -> Result<GridFunction> {
    let orbit = orbit_of(u, group)?;
    Ok(mean_of(u, &orbit, group))
}

/// `max_g ‖g·u_G − u_G‖_∞`.
pub fn check_average_invariance(u: &GridFunction, group: &SymmetryGroup) -> Result<f64> {
    let avg = g_average(u, group)?;
    invariance_residual(&avg, group)
}

/// `max_g ‖g·v − v‖_∞` for an arbitrary field `v`.
pub fn invariance_residual(v: &GridFunction, group: &SymmetryGroup) -> Result<f64> {
    let mut worst = 0.0f64;
    for gv in orbit_of(v, group)? {
        worst = worst.max(gv.max_abs_diff(v)?);
    }
    Ok(worst)
}

/// `Σ_g w_g F(g·u) − F(u_G)`.
pub fn jensen_gap(f: &EnergyFunctional, u: &GridFunction, group: &SymmetryGroup) -> Result<f64> {
    let orbit = orbit_of(u, group)?;
    let avg = mean_of(u, &orbit, group);
    let mean_energy: f64 = orbit
        .iter()
        .zip(group.weights())
        .map(|(v, w)| w * f.eval(v))
        .sum();
    Ok(mean_energy - f.eval(&avg))
}

/// `‖u_G‖_{1,p} ≤ max_g ‖g·u‖_{1,p}` up to [`HULL_TOL`] relative.
pub fn hull_norm_bound(u: &GridFunction, group: &SymmetryGroup, p: f64) -> Result<bool> {
    let orbit = orbit_of(u, group)?;
    let avg = mean_of(u, &orbit, group);
    let lhs = sobolev_norm(&avg, p, SobolevOrder::First)?;
    let mut rhs = 0.0f64;
    for v in &orbit {
        rhs = rhs.max(sobolev_norm(v, p, SobolevOrder::First)?);
    }
    Ok(lhs <= rhs * (1.0 + HULL_TOL) + f64::MIN_POSITIVE)
}

/// `min_g [F(g·u) − F(u_G) − ⟨β, g·u − u_G⟩]` with `β` the exact discrete
/// gradient at `u_G`.
///
/// `β` holds partial derivatives, so the plain dot product used here equals
/// the node-area-weighted L² pairing of the L² gradient `β/A`.
pub fn subgradient_gap(
    f: &EnergyFunctional,
    u: &GridFunction,
    group: &SymmetryGroup,
) -> Result<f64> {
    if !f.is_smooth() {
        return Err(invalid(format!(
            "subgradient check needs a differentiable energy, got {f}"
        )));
    }
    let orbit = orbit_of(u, group)?;
    let avg = mean_of(u, &orbit, group);
    let f_avg = f.eval(&avg);
    let beta = f.gradient(&avg);
    let mut worst = f64::INFINITY;
    for v in &orbit {
        let pairing: f64 = beta
            .values()
            .iter()
            .zip(v.values().iter().zip(avg.values()))
            .map(|(b, (x, m))| b * (x - m))
            .sum();
        worst = worst.min(f.eval(v) - f_avg - pairing);
    }
    Ok(worst)
}

/// The proof quantities for one field and group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageReport {
    pub jensen_gap: f64,
    pub invariance_residual: f64,
    pub norm_bound_satisfied: bool,
    /// `NaN` when the energy is not differentiable.
    pub subgradient_min_gap: f64,
}

impl AverageReport {
    pub fn compute(f: &EnergyFunctional, u: &GridFunction, group: &SymmetryGroup) -> Result<Self> {
        Ok(AverageReport {
            jensen_gap: jensen_gap(f, u, group)?,
            invariance_residual: check_average_invariance(u, group)?,
            norm_bound_satisfied: hull_norm_bound(u, group, f.exponent())?,
            subgradient_min_gap: if f.is_smooth() {
                subgradient_gap(f, u, group)?
            } else {
                f64::NAN
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::energy::{ConcaveNonlinearity, DEFAULT_EPS};
    use crate::error::Error;
    use crate::field::{make_grid, random_field, Domain, Grid};
    use crate::group::{make_cyclic, make_dihedral, make_reflection_1d, make_so2_quadrature};
    use approx::assert_abs_diff_eq;

    fn grid(d: Domain, n: usize) -> Arc<Grid> {
        Arc::new(make_grid(d, n).unwrap())
    }

    #[test]
    fn reflection_average_is_even_part() {
        let g = grid(Domain::Interval, 17);
        let u = random_field(&g, 4, 0);
        let avg = g_average(&u, &make_reflection_1d()).unwrap();
        for i in 0..17 {
            let expected = 0.5 * (u.values()[i] + u.values()[16 - i]);
            assert_eq!(avg.values()[i], expected);
        }
    }

    #[test]
    fn odd_and_even_functions() {
        let g = grid(Domain::Interval, 33);
        let r = make_reflection_1d();
        let odd = GridFunction::from_fn(&g, |x, _| x);
        assert!(g_average(&odd, &r).unwrap().sup_norm() <= 1e-15);
        let even = GridFunction::from_fn(&g, |x, _| x * x);
        assert_eq!(g_average(&even, &r).unwrap(), even);
    }

    #[test]
    fn average_is_invariant() {
        let g = grid(Domain::Square, 17);
        let u = random_field(&g, 8, 0);
        let d4 = make_dihedral(4).unwrap();
        assert!(check_average_invariance(&u, &d4).unwrap() <= 1e-12 * (1.0 + u.sup_norm()));
        let sym = g_average(&u, &d4).unwrap();
        assert!(check_average_invariance(&sym, &d4).unwrap() <= 1e-15);

        let disk = grid(Domain::Disk, 33);
        let v = GridFunction::from_fn(&disk, |x, y| (1.0 - x * x - y * y) * (x + 2.0 * y).exp());
        let c16 = make_so2_quadrature(16).unwrap();
        let avg = g_average(&v, &c16).unwrap();
        // Left invariance is exact for C_16 itself on the averaged orbit.
        let orbit = orbit_of(&v, &c16).unwrap();
        for i in 0..c16.len() {
            let perm = c16.left_translation(i).unwrap();
            let permuted: Vec<Vec<f64>> =
                perm.iter().map(|&j| orbit[j].values().to_vec()).collect();
            let alt = orbit::weighted_mean(&permuted, c16.weights());
            for (a, b) in alt.iter().zip(avg.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn domain_must_be_invariant() {
        let g = grid(Domain::Square, 9);
        let u = random_field(&g, 1, 0);
        assert!(matches!(
            g_average(&u, &make_cyclic(8).unwrap()),
            Err(Error::InvariantDomainViolation { .. })
        ));
    }

    #[test]
    fn toy_swap_group() {
        let orbit = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = [0.5, 0.5];
        let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let grad = |x: &[f64]| x.iter().map(|v| 2.0 * v).collect::<Vec<_>>();
        assert_eq!(orbit::weighted_mean(&orbit, &w), vec![0.5, 0.5]);
        assert_abs_diff_eq!(orbit::jensen_gap(sq, &orbit, &w), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            orbit::subgradient_gap(sq, grad, &orbit, &w),
            0.5,
            epsilon = 1e-15
        );
        let (_, d) = orbit::nearest_to_mean(|x| sq(x).sqrt(), &orbit, &w);
        assert_abs_diff_eq!(d, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn invariant_input_has_zero_gaps() {
        let g = grid(Domain::Square, 13);
        let d4 = make_dihedral(4).unwrap();
        let u = g_average(&random_field(&g, 3, 1), &d4).unwrap();
        let f = EnergyFunctional::p_dirichlet(2.0, DEFAULT_EPS, ConcaveNonlinearity::linear(1.0))
            .unwrap();
        assert!(jensen_gap(&f, &u, &d4).unwrap().abs() <= 1e-12);
        assert!(subgradient_gap(&f, &u, &d4).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn gaps_nonnegative_on_random_fields() {
        let g = grid(Domain::Square, 13);
        let d4 = make_dihedral(4).unwrap();
        let f = EnergyFunctional::p_dirichlet(2.0, DEFAULT_EPS, ConcaveNonlinearity::linear(1.0))
            .unwrap();
        for seed in 0..5 {
            let u = random_field(&g, seed, 0);
            let tol = GAP_TOL * (1.0 + f.eval(&u).abs());
            assert!(jensen_gap(&f, &u, &d4).unwrap() >= -tol);
            assert!(subgradient_gap(&f, &u, &d4).unwrap() >= -tol);
            assert!(hull_norm_bound(&u, &d4, 2.0).unwrap());
            let report = AverageReport::compute(&f, &u, &d4).unwrap();
            assert!(report.norm_bound_satisfied);
            assert!(report.invariance_residual <= 1e-12);
        }
        let zero = GridFunction::zeros(&g);
        assert!(hull_norm_bound(&zero, &d4, 2.0).unwrap());
    }

    #[test]
    fn nonsmooth_energy_rejected_by_subgradient_route() {
        let g = grid(Domain::Square, 9);
        let f = EnergyFunctional::p_dirichlet(1.5, 0.0, ConcaveNonlinearity::linear(1.0)).unwrap();
        let u = random_field(&g, 1, 0);
        assert!(subgradient_gap(&f, &u, &make_dihedral(4).unwrap()).is_err());
        assert!(AverageReport::compute(&f, &u, &make_dihedral(4).unwrap())
            .unwrap()
            .subgradient_min_gap
            .is_nan());
    }

    #[test]
    fn idempotent_and_linear() {
        let g = grid(Domain::Disk, 17);
        let c4 = make_cyclic(4).unwrap();
        let u = random_field(&g, 10, 0);
        let v = random_field(&g, 11, 0);
        let a = g_average(&u, &c4).unwrap();
        let aa = g_average(&a, &c4).unwrap();
        assert!(aa.max_abs_diff(&a).unwrap() <= 1e-13);
        let lhs = g_average(&u.combine(2.0, &v, -0.5).unwrap(), &c4).unwrap();
        let rhs = a.combine(2.0, &g_average(&v, &c4).unwrap(), -0.5).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-13 * (1.0 + lhs.sup_norm()));
    }

    #[test]
    fn average_stays_in_orbit_hull_pointwise() {
        let g = grid(Domain::Disk, 17);
        let so2 = make_so2_quadrature(8).unwrap();
        let u = random_field(&g, 12, 1);
        let orbit = orbit_of(&u, &so2).unwrap();
        let avg = g_average(&u, &so2).unwrap();
        for k in 0..g.len() {
            let lo = orbit
                .iter()
                .map(|v| v.values()[k])
                .fold(f64::INFINITY, f64::min);
            let hi = orbit
                .iter()
                .map(|v| v.values()[k])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(avg.values()[k] >= lo - 1e-15 && avg.values()[k] <= hi + 1e-15);
        }
    }
}

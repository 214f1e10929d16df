//! Numerical probes: the strong mean-value question, the failure of minors
//! to commute with averaging, and the Lipschitz constant of the action.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::average::{orbit, orbit_of};
use crate::error::{invalid, Result};
use crate::field::{orbit_plans, random_field, sobolev_norm, Grid, GridFunction, SobolevOrder};
use crate::group::{group_distance, GroupElement, SymmetryGroup};
use crate::sum::CompensatedSum;

/// A `k×n` matrix per node, zero off the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: Arc<Grid>,
    k: usize,
    n: usize,
    values: Vec<DMatrix<f64>>,
}

fn check_shape(k: usize, n: usize) -> Result<()> {
    if !(2..=3).contains(&k) || !(2..=3).contains(&n) {
        return Err(invalid(format!(
            "matrix fields support k, n in {{2, 3}}, got {k}x{n}"
        )));
    }
    Ok(())
}

impl MatrixField {
    pub fn new(grid: &Arc<Grid>, k: usize, n: usize, values: Vec<DMatrix<f64>>) -> Result<Self> {
        check_shape(k, n)?;
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "matrix field needs {} nodes, got {}",
                grid.len(),
                values.len()
            )));
        }
        let mut values = values;
        for (node, m) in values.iter_mut().enumerate() {
            if m.nrows() != k || m.ncols() != n {
                return Err(invalid(format!(
                    "node {node} holds a {}x{} matrix, expected {k}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("non-finite entry at node {node}")));
            }
            if !grid.interior()[node] {
                m.fill(0.0);
            }
        }
        Ok(MatrixField {
            grid: Arc::clone(grid),
            k,
            n,
            values,
        })
    }

    /// The same matrix at every interior node.
    pub fn constant(grid: &Arc<Grid>, m: &DMatrix<f64>) -> Result<Self> {
        MatrixField::new(grid, m.nrows(), m.ncols(), vec![m.clone(); grid.len()])
    }

    /// Entries are independent [`random_field`]s with seeds derived from
    /// `seed`.
    pub fn random(
        grid: &Arc<Grid>,
        k: usize,
        n: usize,
        seed: u64,
        smoothness: usize,
    ) -> Result<Self> {
        check_shape(k, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<GridFunction> = (0..k * n)
            .map(|_| random_field(grid, rng.random(), smoothness))
            .collect();
        let values = (0..grid.len())
            .map(|node| DMatrix::from_fn(k, n, |r, c| entries[r * n + c].values()[node]))
            .collect();
        MatrixField::new(grid, k, n, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k, self.n)
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `τ(k, n) = Σ_{s=1}^{min(k,n)} C(k,s)·C(n,s)`, the number of entries of a
/// `k×n` matrix together with all its minors.
pub fn tau(k: i64, n: i64) -> Result<u64> {
    if k < 1 || n < 1 {
        return Err(invalid(format!("tau needs k, n >= 1, got ({k}, {n})")));
    }
    let (k, n) = (k as u64, n as u64);
    Ok((1..=k.min(n))
        .map(|s| binomial(k, s) * binomial(n, s))
        .sum())
}

/// All `s`-element subsets of `0..n` in lexicographic order.
fn subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..s).collect();
    if s > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..s).rev().find(|&i| cur[i] < n - s + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..s {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn det(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.determinant(),
    }
}

/// Matrix of all `s×s` minors of `xi`; rows and columns are indexed by
/// lexicographically ordered row and column subsets.
pub fn adjugate(xi: &DMatrix<f64>, s: usize) -> Result<DMatrix<f64>> {
    let (k, n) = xi.shape();
    if s < 2 || s > k.min(n) {
        return Err(invalid(format!(
            "minor order {s} outside 2..={} for a {k}x{n} matrix",
            k.min(n)
        )));
    }
    let rows = subsets(k, s);
    let cols = subsets(n, s);
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        det(&xi.select_rows(&rows[a]).select_columns(&cols[b]))
    }))
}

/// `‖adj_s(Σ w_i A_i) − Σ w_i adj_s(A_i)‖_F` for one set of matrices.
pub fn average_commutator_gap(mats: &[DMatrix<f64>], weights: &[f64], s: usize) -> Result<f64> {
    if mats.is_empty() || mats.len() != weights.len() {
        return Err(invalid(
            "need one weight per matrix and at least one matrix",
        ));
    }
    let shape = mats[0].shape();
    if mats.iter().any(|m| m.shape() != shape) {
        return Err(invalid("matrices of different shapes"));
    }
    let mean = weighted_matrix_mean(mats, weights);
    let minors: Vec<DMatrix<f64>> = mats.iter().map(|m| adjugate(m, s)).collect::<Result<_>>()?;
    let mean_of_minors = weighted_matrix_mean(&minors, weights);
    Ok((adjugate(&mean, s)? - mean_of_minors).norm())
}

fn weighted_matrix_mean(mats: &[DMatrix<f64>], weights: &[f64]) -> DMatrix<f64> {
    let (r, c) = mats[0].shape();
    DMatrix::from_fn(r, c, |i, j| {
        let mut acc = CompensatedSum::default();
        for (m, w) in mats.iter().zip(weights) {
            acc.add(w * m[(i, j)]);
        }
        acc.value()
    })
}

/// `g` acting on `ℝ^n`: itself for `n = d`, `diag(g, 1)` when `n > d`.
fn embed(g: &GroupElement, n: usize) -> DMatrix<f64> {
    let d = g.dim();
    DMatrix::from_fn(n, n, |i, j| {
        if i < d && j < d {
            g.entry(i, j)
        } else if i == j {
            1.0
        } else {
            0.0
        }
    })
}

/// `Σ_nodes ‖adj_s(Σ_g w_g Φ_g) − Σ_g w_g adj_s(Φ_g)‖_F` with the
/// transformed field `Φ_g(x) = Φ(g x)·g`.
pub fn polyconvexity_gap(phi: &MatrixField, group: &SymmetryGroup, s: usize) -> Result<f64> {
    let (k, n) = phi.shape();
    if s < 2 || s > k.min(n) {
        return Err(invalid(format!(
            "minor order {s} outside 2..={} for {k}x{n} fields",
            k.min(n)
        )));
    }
    let grid = phi.grid();
    let plans = orbit_plans(group, grid)?;
    // Pull back each entry, then multiply by g on the right.
    let entries: Vec<Vec<f64>> = (0..k * n)
        .map(|e| phi.values.iter().map(|m| m[(e / n, e % n)]).collect())
        .collect();
    let transformed: Vec<Vec<DMatrix<f64>>> = plans
        .iter()
        .zip(group.elements())
        .map(|(plan, g)| {
            let pulled: Vec<Vec<f64>> = entries.iter().map(|v| plan.apply_values(v)).collect();
            let gm = embed(g, n);
            (0..grid.len())
                .map(|node| DMatrix::from_fn(k, n, |r, c| pulled[r * n + c][node]) * &gm)
                .collect()
        })
        .collect();

    let mut total = CompensatedSum::default();
    for node in (0..grid.len()).filter(|&node| grid.interior()[node]) {
        let mats: Vec<DMatrix<f64>> = transformed.iter().map(|t| t[node].clone()).collect();
        total.add(average_commutator_gap(&mats, group.weights(), s)?);
    }
    Ok(total.value())
}

/// Closest orbit element to the G-average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanValueProbe {
    pub index: usize,
    pub element: GroupElement,
    /// `min_g ‖u_G − g·u‖`, area-weighted 2-norm.
    pub distance: f64,
}

/// Exhaustive search for `g` minimizing `‖u_G − g·u‖`.
pub fn mean_value_probe(u: &GridFunction, group: &SymmetryGroup) -> Result<MeanValueProbe> {
    let area = u.grid().node_area();
    let points: Vec<Vec<f64>> = orbit_of(u, group)?
        .into_iter()
        .map(GridFunction::into_values)
        .collect();
    let norm = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() * area).sqrt();
    let (index, distance) = orbit::nearest_to_mean(norm, &points, group.weights());
    Ok(MeanValueProbe {
        index,
        element: group.elements()[index],
        distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityEstimate {
    /// `max ‖g₁·v − g₂·v‖_{1,p} / d(g₁, g₂)` over the sampled pairs.
    pub max_ratio: f64,
    /// Ratio at the sampled pair with the smallest group distance.
    pub nearest_pair_ratio: f64,
    pub nearest_pair_distance: f64,
    pub pairs: usize,
}

/// Estimate the Lipschitz constant of `g ↦ g·v` in `W^{1,p}`.
///
/// All unordered pairs are used when there are at most `pair_samples` of
/// them; otherwise `pair_samples` pairs are drawn with a fixed seed.
pub fn action_continuity_probe(
    v: &GridFunction,
    group: &SymmetryGroup,
    pair_samples: usize,
    p: f64,
) -> Result<ContinuityEstimate> {
    if group.len() < 2 {
        return Err(invalid(
            "continuity probe needs at least two group elements",
        ));
    }
    if pair_samples == 0 {
        return Err(invalid("pair_samples must be positive"));
    }
    let orbit = orbit_of(v, group)?;
    let m = group.len();
    let all = m * (m - 1) / 2;
    let pairs: Vec<(usize, usize)> = if all <= pair_samples {
        (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (0..pair_samples)
            .map(|_| {
                let i = rng.random_range(0..m);
                let j = (i + rng.random_range(1..m)) % m;
                (i.min(j), i.max(j))
            })
            .collect()
    };

    let mut est = ContinuityEstimate {
        max_ratio: 0.0,
        nearest_pair_ratio: 0.0,
        nearest_pair_distance: f64::INFINITY,
        pairs: 0,
    };
    for (i, j) in pairs {
        let d = group_distance(&group.elements()[i], &group.elements()[j])?;
        if d == 0.0 {
            continue;
        }
        let diff = orbit[i].combine(1.0, &orbit[j], -1.0)?;
        let ratio = sobolev_norm(&diff, p, SobolevOrder::First)? / d;
        est.pairs += 1;
        est.max_ratio = est.max_ratio.max(ratio);
        if d < est.nearest_pair_distance {
            est.nearest_pair_distance = d;
            est.nearest_pair_ratio = ratio;
        }
    }
    if est.pairs == 0 {
        return Err(invalid("no pair of distinct group elements"));
    }
    Ok(est)
}

/// Structured output of a probe run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub inputs: BTreeMap<String, String>,
    pub results: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
}

impl ProbeReport {
    pub fn new(probe: impl Into<String>) -> Self {
        ProbeReport {
            probe: probe.into(),
            passed: true,
            ..Default::default()
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn result(mut self, key: &str, value: f64) -> Self {
        self.results.insert(key.to_string(), value);
        self
    }

    pub fn check(mut self, key: &str, ok: bool) -> Self {
        self.checks.insert(key.to_string(), ok);
        self.passed &= ok;
        self
    }
}

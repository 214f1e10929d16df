//! Discrete p-Dirichlet and polyharmonic energies with concave lower-order
//! terms.
//!
//! ```text
//! p-dirichlet:  F(u) = Σ_cells (1/p)(|∇_h u|² + ε²)^{p/2}·A − Σ_nodes f(u)·A
//! polyharmonic: F(u) = Σ_nodes ((Δ_h^m u)²/2 − f(u))·A
//! ```
//!
//! `A` is the node (and cell) area. Gradients are exact partial derivatives
//! of these sums with respect to interior node values.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::stencil::{
    cell_corners, cell_count, cell_sq_gradient, cell_sq_gradient_change, laplacian_power,
};
use crate::field::{orbit_plans, GridFunction};
use crate::group::SymmetryGroup;
use crate::sum::compensated;

/// Default regularization for the p-Dirichlet term.
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ConcaveNonlinearity {
    /// `f(s) = λ·s`.
    Linear { lambda: f64 },
    /// `f(s) = a·s − b·s²`, `b ≥ 0`.
    Quadratic { a: f64, b: f64 },
    /// `f(s) = −eˢ`.
    NegExp,
}

impl ConcaveNonlinearity {
    pub fn linear(lambda: f64) -> Self {
        ConcaveNonlinearity::Linear { lambda }
    }

    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        if !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!(
                "quadratic nonlinearity needs finite a and b ≥ 0, got a={a}, b={b}"
            )));
        }
        Ok(ConcaveNonlinearity::Quadratic { a, b })
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            ConcaveNonlinearity::Linear { lambda } => lambda * s,
            ConcaveNonlinearity::Quadratic { a, b } => a * s - b * s * s,
            ConcaveNonlinearity::NegExp => -s.exp(),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            ConcaveNonlinearity::Linear { lambda } => lambda,
            ConcaveNonlinearity::Quadratic { a, b } => a - 2.0 * b * s,
            ConcaveNonlinearity::NegExp => -s.exp(),
        }
    }

    /// `f(new) − f(old)` given `step = new − old`, without cancellation.
    fn change(&self, old: f64, new: f64, step: f64) -> f64 {
        match *self {
            ConcaveNonlinearity::Linear { lambda } => lambda * step,
            ConcaveNonlinearity::Quadratic { a, b } => a * step - b * step * (new + old),
            ConcaveNonlinearity::NegExp => -old.exp() * step.exp_m1(),
        }
    }

    /// Sampled concavity and monotonicity of `f′` on `[−10, 10]`.
    ///
    /// Returns the worst midpoint violation `mean(f(a), f(b)) − f((a+b)/2)`
    /// (positive means not concave) and the worst increase of `f′` between
    /// ordered sample points.
    pub fn concavity_defect(&self, samples: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mid = f64::NEG_INFINITY;
        let mut slope = f64::NEG_INFINITY;
        for _ in 0..samples {
            let a: f64 = rng.random_range(-10.0..10.0);
            let b: f64 = rng.random_range(-10.0..10.0);
            let m = 0.5 * (a + b);
            let scale = 1.0 + self.value(a).abs().max(self.value(b).abs());
            mid = mid.max((0.5 * (self.value(a) + self.value(b)) - self.value(m)) / scale);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let dscale = 1.0 + self.derivative(lo).abs().max(self.derivative(hi).abs());
            slope = slope.max((self.derivative(hi) - self.derivative(lo)) / dscale);
        }
        (mid, slope)
    }
}

impl fmt::Display for ConcaveNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcaveNonlinearity::Linear { lambda } => write!(f, "linear:{lambda}"),
            ConcaveNonlinearity::Quadratic { a, b } => write!(f, "quadratic:{a},{b}"),
            ConcaveNonlinearity::NegExp => write!(f, "negexp"),
        }
    }
}

fn parse_f64(tok: &str, what: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| invalid(format!("{what} '{tok}': {e}")))
}

impl FromStr for ConcaveNonlinearity {
    type Err = Error;

    /// `linear:λ`, `quadratic:a,b` or `negexp`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s, None),
        };
        let f = match (name, arg) {
            ("linear", Some(a)) => ConcaveNonlinearity::linear(parse_f64(a, "linear coefficient")?),
            ("quadratic", Some(a)) => {
                let parts: Vec<&str> = a.split(',').collect();
                if parts.len() != 2 {
                    return Err(invalid(format!("quadratic needs 'a,b', got '{a}'")));
                }
                ConcaveNonlinearity::quadratic(
                    parse_f64(parts[0], "a")?,
                    parse_f64(parts[1], "b")?,
                )?
            }
            ("negexp", None) => ConcaveNonlinearity::NegExp,
            _ => return Err(invalid(format!("unknown nonlinearity '{s}'"))),
        };
        if let ConcaveNonlinearity::Linear { lambda } = f {
            if !lambda.is_finite() {
                return Err(invalid("linear coefficient must be finite"));
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnergyKind {
    PDirichlet { p: f64, eps: f64 },
    Polyharmonic { m: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyFunctional {
    kind: EnergyKind,
    nonlinearity: ConcaveNonlinearity,
}

impl EnergyFunctional {
    pub fn p_dirichlet(p: f64, eps: f64, nonlinearity: ConcaveNonlinearity) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(invalid(format!("p must exceed 1, got {p}")));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid(format!("eps must be nonnegative, got {eps}")));
        }
        Ok(EnergyFunctional {
            kind: EnergyKind::PDirichlet { p, eps },
            nonlinearity,
        })
    }

    pub fn polyharmonic(m: u32, nonlinearity: ConcaveNonlinearity) -> Result<Self> {
        if m == 0 {
            return Err(invalid("polyharmonic order m must be at least 1"));
        }
        Ok(EnergyFunctional {
            kind: EnergyKind::Polyharmonic { m },
            nonlinearity,
        })
    }

    /// Parse `plaplace:p=_,eps=_` (eps optional) or `polyharmonic:m=_`.
    pub fn parse(spec: &str, nonlinearity: ConcaveNonlinearity) -> Result<Self> {
        let spec = spec.trim();
        let (name, args) = spec
            .split_once(':')
            .ok_or_else(|| invalid(format!("functional spec '{spec}' needs parameters")))?;
        let mut p = None;
        let mut eps = None;
        let mut m = None;
        for kv in args.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected key=value, got '{kv}'")))?;
            match k.trim() {
                "p" => p = Some(parse_f64(v, "p")?),
                "eps" => eps = Some(parse_f64(v, "eps")?),
                "m" => {
                    m = Some(
                        v.trim()
                            .parse::<u32>()
                            .map_err(|e| invalid(format!("m '{v}': {e}")))?,
                    )
                }
                other => return Err(invalid(format!("unknown functional parameter '{other}'"))),
            }
        }
        match name.trim() {
            "plaplace" if m.is_none() => Self::p_dirichlet(
                p.ok_or_else(|| invalid("plaplace needs p"))?,
                eps.unwrap_or(DEFAULT_EPS),
                nonlinearity,
            ),
            "polyharmonic" if p.is_none() && eps.is_none() => Self::polyharmonic(
                m.ok_or_else(|| invalid("polyharmonic needs m"))?,
                nonlinearity,
            ),
            _ => Err(invalid(format!("unknown functional spec '{spec}'"))),
        }
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }

    pub fn nonlinearity(&self) -> ConcaveNonlinearity {
        self.nonlinearity
    }

    /// The exponent of the natural norm: `p`, or 2 for polyharmonic.
    pub fn exponent(&self) -> f64 {
        match self.kind {
            EnergyKind::PDirichlet { p, .. } => p,
            EnergyKind::Polyharmonic { .. } => 2.0,
        }
    }

    /// True when the discrete energy is differentiable everywhere.
    pub fn is_smooth(&self) -> bool {
        match self.kind {
            EnergyKind::PDirichlet { p, eps } => eps > 0.0 || p >= 2.0,
            EnergyKind::Polyharmonic { .. } => true,
        }
    }

    pub fn spec(&self) -> String {
        match self.kind {
            EnergyKind::PDirichlet { p, eps } => format!("plaplace:p={p},eps={eps}"),
            EnergyKind::Polyharmonic { m } => format!("polyharmonic:m={m}"),
        }
    }

    pub fn eval(&self, u: &GridFunction) -> f64 {
        let grid = u.grid();
        let v = u.values();
        let a = grid.node_area();
        let lower: f64 = (0..grid.len())
            .filter(|&k| grid.interior()[k])
            .map(|k| self.nonlinearity.value(v[k]))
            .sum();
        let upper: f64 = match self.kind {
            EnergyKind::PDirichlet { p, eps } => {
                let e2 = eps * eps;
                (0..cell_count(grid))
                    .map(|c| (cell_sq_gradient(grid, v, c) + e2).powf(p / 2.0) / p)
                    .sum()
            }
            EnergyKind::Polyharmonic { m } => laplacian_power(grid, v, m)
                .iter()
                .map(|x| 0.5 * x * x)
                .sum(),
        };
        (upper - lower) * a
    }

    /// `F(new) − F(old)` evaluated term by term from the step, accurate to
    /// rounding relative to the size of the change rather than of `F`.
    pub fn eval_change(&self, old: &GridFunction, new: &GridFunction) -> Result<f64> {
        old.ensure_same_grid(new)?;
        let grid = old.grid();
        let (vo, vn) = (old.values(), new.values());
        let step: Vec<f64> = vn.iter().zip(vo).map(|(n, o)| n - o).collect();
        let a = grid.node_area();
        let lower = compensated(
            (0..grid.len())
                .filter(|&k| grid.interior()[k])
                .map(|k| self.nonlinearity.change(vo[k], vn[k], step[k])),
        );
        let upper = match self.kind {
            EnergyKind::PDirichlet { p, eps } => {
                let e2 = eps * eps;
                compensated((0..cell_count(grid)).map(|c| {
                    let s0 = cell_sq_gradient(grid, vo, c) + e2;
                    let dq = cell_sq_gradient_change(grid, vo, vn, &step, c);
                    if dq == 0.0 {
                        0.0
                    } else if s0 == 0.0 {
                        dq.max(0.0).powf(p / 2.0) / p
                    } else {
                        s0.powf(p / 2.0) * ((p / 2.0) * (dq / s0).ln_1p()).exp_m1() / p
                    }
                }))
            }
            EnergyKind::Polyharmonic { m } => {
                let ls = laplacian_power(grid, &step, m);
                let lo = laplacian_power(grid, vo, m);
                let ln = laplacian_power(grid, vn, m);
                compensated((0..grid.len()).map(|k| 0.5 * ls[k] * (ln[k] + lo[k])))
            }
        };
        Ok((upper - lower) * a)
    }

    /// Partial derivatives of [`eval`](Self::eval) at interior nodes; zero
    /// elsewhere.
    pub fn gradient(&self, u: &GridFunction) -> GridFunction {
        let grid = u.grid();
        let v = u.values();
        let a = grid.node_area();
        let mut out = vec![0.0; grid.len()];
        match self.kind {
            EnergyKind::PDirichlet { p, eps } => {
                let e2 = eps * eps;
                // d/dq of (1/p)(q + ε²)^{p/2}·A, per cell.
                let slope: Vec<f64> = (0..cell_count(grid))
                    .map(|c| {
                        let s = cell_sq_gradient(grid, v, c) + e2;
                        if s == 0.0 {
                            // All edge differences vanish, so the slope is never used.
                            0.0
                        } else {
                            0.5 * s.powf(p / 2.0 - 1.0) * a
                        }
                    })
                    .collect();
                if grid.is_1d() {
                    let h2 = grid.hx() * grid.hx();
                    for k in (0..grid.len()).filter(|&k| grid.interior()[k]) {
                        // Cells k−1 (left) and k (right).
                        let left = slope[k - 1] * (2.0 * (v[k] - v[k - 1]) / h2);
                        let right = slope[k] * (2.0 * (v[k] - v[k + 1]) / h2);
                        out[k] = left + right;
                    }
                } else {
                    let (hx2, hy2) = (grid.hx() * grid.hx(), grid.hy() * grid.hy());
                    let nx = grid.nx();
                    let w = nx - 1;
                    // Contribution of cell c to its corner `node` whose x- and
                    // y-neighbours inside the cell are `xn` and `yn`.
                    let contrib = |c: usize, node: usize, xn: usize, yn: usize| {
                        slope[c] * ((v[node] - v[xn]) / hx2 + (v[node] - v[yn]) / hy2)
                    };
                    for k in (0..grid.len()).filter(|&k| grid.interior()[k]) {
                        let (i, j) = grid.ij(k);
                        let ne = j * w + i;
                        let nw = j * w + i - 1;
                        let sw = (j - 1) * w + i - 1;
                        let se = (j - 1) * w + i;
                        debug_assert_eq!(cell_corners(grid, ne)[0], k);
                        let (l, r, d, up) = (k - 1, k + 1, k - nx, k + nx);
                        let t_ne = contrib(ne, k, r, up);
                        let t_nw = contrib(nw, k, l, up);
                        let t_sw = contrib(sw, k, l, d);
                        let t_se = contrib(se, k, r, d);
                        out[k] = (t_ne + t_sw) + (t_nw + t_se);
                    }
                }
            }
            EnergyKind::Polyharmonic { m } => {
                let l2m = laplacian_power(grid, v, 2 * m);
                for k in (0..grid.len()).filter(|&k| grid.interior()[k]) {
                    out[k] = l2m[k] * a;
                }
            }
        }
        for k in (0..grid.len()).filter(|&k| grid.interior()[k]) {
            out[k] -= self.nonlinearity.derivative(v[k]) * a;
        }
        GridFunction::from_raw(grid, out)
    }

    /// `max_g |F(g·u) − F(u)|`.
    pub fn check_invariance(&self, u: &GridFunction, group: &SymmetryGroup) -> Result<f64> {
        let plans = orbit_plans(group, u.grid())?;
        let f0 = self.eval(u);
        let mut worst = 0.0f64;
        for plan in &plans {
            worst = worst.max((self.eval(&plan.apply(u)?) - f0).abs());
        }
        Ok(worst)
    }

    /// Convexity gaps `t·F(u) + (1−t)·F(v) − F(t·u + (1−t)·v)`.
    pub fn check_convexity_segment(
        &self,
        u: &GridFunction,
        v: &GridFunction,
        t_samples: &[f64],
    ) -> Result<Vec<f64>> {
        u.ensure_same_grid(v)?;
        let (fu, fv) = (self.eval(u), self.eval(v));
        t_samples
            .iter()
            .map(|&t| {
                if !(0.0..=1.0).contains(&t) {
                    return Err(invalid(format!("segment parameter {t} outside [0, 1]")));
                }
                let w = u.combine(t, v, 1.0 - t)?;
                Ok(t * fu + (1.0 - t) * fv - self.eval(&w))
            })
            .collect()
    }
}

impl fmt::Display for EnergyFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} with f = {}", self.spec(), self.nonlinearity)
    }
}

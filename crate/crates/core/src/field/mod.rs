//! Masked uniform grids, zero-trace grid functions and the pullback action.
//!
//! Domains are normalized into `[−1, 1]^d` and centered at the origin, so the
//! matrices of [`crate::group`] act on node coordinates directly. Node
//! coordinates are computed as `h·(i − c)` with `c = (n − 1)/2`, which makes
//! the lattice exactly symmetric under sign flips and quarter turns.
//!
//! The free nodes of a grid are its *interior* nodes: masked nodes whose
//! stencil neighbours are all masked. Every [`GridFunction`] vanishes on the
//! remaining nodes, which is the discrete zero trace.

pub mod io;
pub(crate) mod stencil;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::group::{GroupElement, SymmetryGroup};

/// Tolerance for domain membership and lattice matching, in length units
/// and index units respectively.
pub const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Domain {
    Interval,
    Square,
    Disk,
    Annulus {
        inner: f64,
    },
    RegularPolygon {
        sides: usize,
    },
    /// A grid read from a file whose mask matched no standard domain.
    Masked,
}

impl Domain {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Domain::Interval => Some(1),
            Domain::Masked => None,
            _ => Some(2),
        }
    }

    /// How far `p` lies outside the closed domain (`≤ 0` inside).
    /// `None` for [`Domain::Masked`].
    pub fn excess(&self, p: [f64; 2]) -> Option<f64> {
        let [x, y] = p;
        let r = x.hypot(y);
        Some(match *self {
            Domain::Interval => x.abs() - 1.0,
            Domain::Square => x.abs().max(y.abs()) - 1.0,
            Domain::Disk => r - 1.0,
            Domain::Annulus { inner } => (r - 1.0).max(inner - r),
            Domain::RegularPolygon { sides } => {
                let k = sides as f64;
                let apothem = (std::f64::consts::PI / k).cos();
                (0..sides)
                    .map(|j| {
                        let a = std::f64::consts::PI * (2 * j + 1) as f64 / k;
                        x * a.cos() + y * a.sin() - apothem
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Domain::Masked => return None,
        })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Domain::Annulus { inner } if !(inner > 0.0 && inner < 1.0) => Err(invalid(format!(
                "annulus inner radius {inner} must lie in (0, 1)"
            ))),
            Domain::RegularPolygon { sides } if sides < 3 => Err(invalid(format!(
                "regular polygon needs at least 3 sides, got {sides}"
            ))),
            Domain::Masked => Err(invalid("a masked domain cannot be generated")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval => write!(f, "interval"),
            Domain::Square => write!(f, "square"),
            Domain::Disk => write!(f, "disk"),
            Domain::Annulus { inner } => write!(f, "annulus:{inner}"),
            Domain::RegularPolygon { sides } => write!(f, "polygon:{sides}"),
            Domain::Masked => write!(f, "masked"),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    /// `interval`, `square`, `disk`, `annulus:r0`, `polygon:k`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let d = match (name, arg) {
            ("interval", None) => Domain::Interval,
            ("square", None) => Domain::Square,
            ("disk", None) => Domain::Disk,
            ("annulus", Some(a)) => Domain::Annulus {
                inner: a
                    .parse()
                    .map_err(|e| invalid(format!("annulus radius '{a}': {e}")))?,
            },
            ("polygon" | "regular_polygon", Some(a)) => Domain::RegularPolygon {
                sides: a
                    .parse()
                    .map_err(|e| invalid(format!("polygon sides '{a}': {e}")))?,
            },
            _ => return Err(invalid(format!("unknown domain spec '{s}'"))),
        };
        d.validate()?;
        Ok(d)
    }
}

/// Uniform lattice with a domain mask. `ny == 1` means a 1D grid.
#[derive(Debug, Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    mask: Vec<bool>,
    interior: Vec<bool>,
    domain: Domain,
}

/// Lattice equality: dimensions, spacings and mask. The domain tag is
/// metadata and does not take part.
impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.hx.to_bits() == other.hx.to_bits()
            && self.hy.to_bits() == other.hy.to_bits()
            && self.mask == other.mask
    }
}

impl Grid {
    /// Build a grid from raw lattice data. The grid is centered at the origin.
    pub fn new(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        mask: Vec<bool>,
        domain: Domain,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("grid needs at least one node per axis"));
        }
        if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
            return Err(invalid(format!(
                "grid spacings must be positive, got {hx}, {hy}"
            )));
        }
        if mask.len() != nx * ny {
            return Err(invalid(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                nx * ny
            )));
        }
        let mut grid = Grid {
            nx,
            ny,
            hx,
            hy,
            mask,
            interior: Vec::new(),
            domain,
        };
        grid.interior = (0..nx * ny).map(|k| grid.compute_interior(k)).collect();
        Ok(grid)
    }

    fn compute_interior(&self, k: usize) -> bool {
        if !self.mask[k] {
            return false;
        }
        let (i, j) = self.ij(k);
        if i == 0 || i + 1 >= self.nx || !self.mask[k - 1] || !self.mask[k + 1] {
            return false;
        }
        if self.is_1d() {
            return true;
        }
        j > 0 && j + 1 < self.ny && self.mask[k - self.nx] && self.mask[k + self.nx]
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    pub fn dim(&self) -> usize {
        if self.is_1d() {
            1
        } else {
            2
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// Quadrature weight of one node (and of one cell).
    pub fn node_area(&self) -> f64 {
        if self.is_1d() {
            self.hx
        } else {
            self.hx * self.hy
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    fn center(n: usize) -> f64 {
        (n as f64 - 1.0) / 2.0
    }

    /// Coordinates of node `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> [f64; 2] {
        let x = self.hx * (i as f64 - Self::center(self.nx));
        let y = if self.is_1d() {
            0.0
        } else {
            self.hy * (j as f64 - Self::center(self.ny))
        };
        [x, y]
    }

    pub fn node_coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        self.coords(i, j)
    }

    /// Coordinates of node `(0, 0)`.
    pub fn origin(&self) -> [f64; 2] {
        self.coords(0, 0)
    }

    /// Fractional lattice indices of a point.
    pub fn fractional_index(&self, p: [f64; 2]) -> [f64; 2] {
        let fi = p[0] / self.hx + Self::center(self.nx);
        let fj = if self.is_1d() {
            0.0
        } else {
            p[1] / self.hy + Self::center(self.ny)
        };
        [fi, fj]
    }

    /// Replace the domain tag after checking that the domain generates this
    /// exact lattice and mask.
    pub fn with_domain(&self, domain: Domain) -> Result<Grid> {
        let fresh = make_grid(domain, self.nx)?;
        if fresh != *self {
            return Err(invalid(format!(
                "grid does not match the lattice generated by domain '{domain}'"
            )));
        }
        Ok(fresh)
    }

    /// How far `p` lies outside the domain. For masked grids a point counts
    /// as inside when its nearest lattice node is masked.
    pub fn excess(&self, p: [f64; 2]) -> f64 {
        if let Some(e) = self.domain.excess(p) {
            return e;
        }
        let [fi, fj] = self.fractional_index(p);
        let (ri, rj) = (fi.round(), fj.round());
        let inside = ri >= 0.0
            && rj >= 0.0
            && (ri as usize) < self.nx
            && (rj as usize) < self.ny
            && self.mask[self.index(ri as usize, rj as usize)];
        if inside {
            0.0
        } else {
            self.hx.max(self.hy)
        }
    }
}

/// Build the lattice for one of the standard domains with `resolution`
/// nodes per axis.
pub fn make_grid(domain: Domain, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < 3 {
        return Err(invalid(format!(
            "resolution must be at least 3, got {resolution}"
        )));
    }
    let h = 2.0 / (resolution as f64 - 1.0);
    let (nx, ny, hy) = match domain.dim() {
        Some(1) => (resolution, 1, 1.0),
        _ => (resolution, resolution, h),
    };
    let mut grid = Grid::new(nx, ny, h, hy, vec![true; nx * ny], domain)?;
    let mask: Vec<bool> = (0..nx * ny)
        .map(|k| domain.excess(grid.node_coords(k)).unwrap_or(0.0) <= GEOMETRY_TOL)
        .collect();
    grid = Grid::new(nx, ny, h, hy, mask, domain)?;
    if grid.interior_count() == 0 {
        return Err(invalid(format!(
            "domain '{domain}' at resolution {resolution} has no interior nodes"
        )));
    }
    Ok(grid)
}

/// A real function on the nodes of a grid, zero off the interior nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.values == other.values
    }
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    /// Wrap node values; rejects wrong lengths, non-finite values and
    /// nonzero values off the interior.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(invalid(format!("non-finite value at node {k}")));
            }
            if !grid.interior[k] && v != 0.0 {
                return Err(invalid(format!(
                    "node {k} is on the boundary or outside the domain but has value {v}"
                )));
            }
        }
        Ok(GridFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Values are taken as given at interior nodes and zeroed elsewhere.
    pub(crate) fn from_raw(grid: &Arc<Grid>, mut values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        for (v, &inside) in values.iter_mut().zip(&grid.interior) {
            if !inside {
                *v = 0.0;
            }
        }
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Sample `f(x, y)` at interior nodes.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.interior[k] {
                    let [x, y] = grid.node_coords(k);
                    f(x, y)
                } else {
                    0.0
                }
            })
            .collect();
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(invalid("grid functions live on different grids"))
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(GridFunction::from_raw(&self.grid, values))
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction::from_raw(&self.grid, self.values.iter().map(|x| a * x).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `(Σ_nodes v² · nodearea)^{1/2}`.
    pub fn weighted_l2_norm(&self) -> f64 {
        let a = self.grid.node_area();
        (self.values.iter().map(|v| v * v).sum::<f64>() * a).sqrt()
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

#[derive(Debug, Clone, Copy)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
    len: u8,
}

#[derive(Debug, Clone)]
enum PlanKind {
    /// Source node per interior node; `None` means the image is a lattice
    /// point outside the grid, where the zero extension applies.
    Exact(Vec<Option<usize>>),
    Bilinear(Vec<Taps>),
}

/// Precomputed pullback `u ↦ u(g·)` for one element on one grid.
#[derive(Debug, Clone)]
pub struct PullbackPlan {
    grid: Arc<Grid>,
    kind: PlanKind,
}

impl PullbackPlan {
    pub fn new(g: &GroupElement, grid: &Arc<Grid>) -> Result<Self> {
        if g.dim() != grid.dim() {
            return Err(invalid(format!(
                "element of dimension {} acting on a {}D grid",
                g.dim(),
                grid.dim()
            )));
        }
        let images: Vec<[f64; 2]> = (0..grid.len())
            .map(|k| grid.fractional_index(g.apply(grid.node_coords(k))))
            .collect();
        let on_lattice = |f: f64| (f - f.round()).abs() <= GEOMETRY_TOL;
        let exact = (0..grid.len())
            .filter(|&k| grid.interior[k])
            .all(|k| on_lattice(images[k][0]) && on_lattice(images[k][1]));

        let lookup = |i: f64, j: f64| -> Option<usize> {
            if i < 0.0 || j < 0.0 || i as usize >= grid.nx || j as usize >= grid.ny {
                None
            } else {
                Some(grid.index(i as usize, j as usize))
            }
        };

        let kind = if exact {
            PlanKind::Exact(
                (0..grid.len())
                    .map(|k| {
                        if grid.interior[k] {
                            lookup(images[k][0].round(), images[k][1].round())
                        } else {
                            None
                        }
                    })
                    .collect(),
            )
        } else {
            PlanKind::Bilinear(
                (0..grid.len())
                    .map(|k| {
                        let mut taps = Taps {
                            index: [0; 4],
                            weight: [0.0; 4],
                            len: 0,
                        };
                        if !grid.interior[k] {
                            return taps;
                        }
                        let [fi, fj] = images[k];
                        let (i0, j0) = (fi.floor(), fj.floor());
                        let (tx, ty) = (fi - i0, fj - j0);
                        let corners: &[(f64, f64, f64)] = if grid.is_1d() {
                            &[(0.0, 0.0, 1.0 - tx), (1.0, 0.0, tx)]
                        } else {
                            &[
                                (0.0, 0.0, (1.0 - tx) * (1.0 - ty)),
                                (1.0, 0.0, tx * (1.0 - ty)),
                                (0.0, 1.0, (1.0 - tx) * ty),
                                (1.0, 1.0, tx * ty),
                            ]
                        };
                        for &(di, dj, w) in corners {
                            if w == 0.0 {
                                continue;
                            }
                            if let Some(src) = lookup(i0 + di, j0 + dj) {
                                let n = taps.len as usize;
                                taps.index[n] = src;
                                taps.weight[n] = w;
                                taps.len += 1;
                            }
                        }
                        taps
                    })
                    .collect(),
            )
        };
        Ok(PullbackPlan {
            grid: Arc::clone(grid),
            kind,
        })
    }

    /// True when the element maps the lattice onto itself and the pullback
    /// is a pure permutation of node values.
    pub fn is_grid_exact(&self) -> bool {
        matches!(self.kind, PlanKind::Exact(_))
    }

    /// Pull back raw node values laid out on this plan's grid.
    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid.len());
        match &self.kind {
            PlanKind::Exact(src) => src.iter().map(|s| s.map_or(0.0, |s| values[s])).collect(),
            PlanKind::Bilinear(taps) => taps
                .iter()
                .map(|t| {
                    (0..t.len as usize)
                        .map(|n| t.weight[n] * values[t.index[n]])
                        .sum()
                })
                .collect(),
        }
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if !(Arc::ptr_eq(&self.grid, &u.grid) || *self.grid == *u.grid) {
            return Err(invalid("pullback plan built for a different grid"));
        }
        Ok(GridFunction::from_raw(
            &u.grid,
            self.apply_values(&u.values),
        ))
    }
}

/// `(g·u)(x) = u(g x)`, bilinear (1D: linear) interpolation with zero
/// extension; a pure permutation when `g` preserves the lattice.
pub fn pullback(g: &GroupElement, u: &GridFunction) -> Result<GridFunction> {
    PullbackPlan::new(g, &u.grid)?.apply(u)
}

/// Plans for every element of a group, after checking the domain.
pub(crate) fn orbit_plans(group: &SymmetryGroup, grid: &Arc<Grid>) -> Result<Vec<PullbackPlan>> {
    let check = check_domain_invariance(group, grid)?;
    if let Some(w) = check.worst.filter(|_| !check.invariant) {
        return Err(Error::InvariantDomainViolation {
            element: w.element,
            x: w.x,
            y: w.y,
            excess: w.excess,
        });
    }
    group
        .elements()
        .iter()
        .map(|g| PullbackPlan::new(g, grid))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SobolevOrder {
    /// `W^{1,p}` with the cell gradient.
    First,
    /// `H^{2m}`-type norm with the m-th power of the 5-point Laplacian.
    Polyharmonic(u32),
}

/// Discrete Sobolev norm. Order 1:
/// `(Σ_cells |∇_h u|^p·A + Σ_nodes |u|^p·A)^{1/p}`; order 2m replaces the
/// cell term by `Σ_nodes |Δ_h^m u|^p·A`.
pub fn sobolev_norm(u: &GridFunction, p: f64, order: SobolevOrder) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid(format!("sobolev_norm requires p > 1, got {p}")));
    }
    let grid = &u.grid;
    let a = grid.node_area();
    let lower: f64 = u.values.iter().map(|v| v.abs().powf(p)).sum();
    let upper: f64 = match order {
        SobolevOrder::First => stencil::cell_sq_gradients(grid, &u.values)
            .iter()
            .map(|q| q.powf(p / 2.0))
            .sum(),
        SobolevOrder::Polyharmonic(m) => {
            if m == 0 {
                return Err(invalid("polyharmonic order must be at least 1"));
            }
            stencil::laplacian_power(grid, &u.values, m)
                .iter()
                .map(|v| v.abs().powf(p))
                .sum()
        }
    };
    Ok(((upper + lower) * a).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainWitness {
    pub element: usize,
    pub node: usize,
    pub x: f64,
    pub y: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainCheck {
    pub invariant: bool,
    /// Node and element with the largest excess, if any node was moved
    /// outside.
    pub worst: Option<DomainWitness>,
}

/// Does every element map every masked node into the closed domain?
pub fn check_domain_invariance(group: &SymmetryGroup, grid: &Grid) -> Result<DomainCheck> {
    if group.dim() != grid.dim() {
        return Err(invalid(format!(
            "group of dimension {} on a {}D grid",
            group.dim(),
            grid.dim()
        )));
    }
    let mut worst: Option<DomainWitness> = None;
    for (element, g) in group.elements().iter().enumerate() {
        for node in (0..grid.len()).filter(|&k| grid.mask[k]) {
            let [x, y] = grid.node_coords(node);
            let excess = grid.excess(g.apply([x, y]));
            if excess > GEOMETRY_TOL && worst.is_none_or(|w| excess > w.excess) {
                worst = Some(DomainWitness {
                    element,
                    node,
                    x,
                    y,
                    excess,
                });
            }
        }
    }
    Ok(DomainCheck {
        invariant: worst.is_none(),
        worst,
    })
}

/// Uniform(−1, 1) noise on interior nodes followed by `smoothness`
/// neighbour-averaging passes (5-point in 2D, 3-point in 1D).
pub fn random_field(grid: &Arc<Grid>, seed: u64, smoothness: usize) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = grid
        .interior
        .iter()
        .map(|&inside| {
            if inside {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    let denom = if grid.is_1d() { 3.0 } else { 5.0 };
    for _ in 0..smoothness {
        let next: Vec<f64> = (0..grid.len())
            .map(|k| {
                if !grid.interior[k] {
                    return 0.0;
                }
                let mut s = values[k] + values[k - 1] + values[k + 1];
                if !grid.is_1d() {
                    s += values[k - grid.nx] + values[k + grid.nx];
                }
                s / denom
            })
            .collect();
        values = next;
    }
    GridFunction {
        grid: Arc::clone(grid),
        values,
    }
}

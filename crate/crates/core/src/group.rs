//! Finite symmetry groups of O(1) and O(2) with their Haar weights.
//!
//! Every group here is a finite list of orthogonal matrices with uniform
//! weights, which is exactly the Haar probability measure of a finite group.
//! The rotation group SO(2) is represented by its N-node uniform quadrature,
//! the cyclic group C_N; averages over C_N converge to SO(2) averages as N
//! grows, and C_N is closed under multiplication so every invariance
//! statement about it is exact.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Entrywise tolerance for orthogonality, determinant and weight checks.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Entrywise tolerance when matching a product against the element list.
pub const MATCH_TOL: f64 = 1e-9;
/// Default node count for the SO(2) quadrature.
pub const DEFAULT_SO2_NODES: usize = 32;

/// An orthogonal `dim × dim` matrix, `dim ∈ {1, 2}`.
///
/// Stored in a fixed 2×2 array; for `dim == 1` only `m[0][0]` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupElement {
    dim: usize,
    m: [[f64; 2]; 2],
}

/// `(cos, sin)` of `2π·k/n`, exact whenever the angle is a multiple of π/2.
fn turn_fraction(k: usize, n: usize) -> (f64, f64) {
    let r = k % n;
    if (4 * r).is_multiple_of(n) {
        match 4 * r / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let a = 2.0 * std::f64::consts::PI * r as f64 / n as f64;
        (a.cos(), a.sin())
    }
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        assert!(
            dim == 1 || dim == 2,
            "only 1D and 2D elements are supported"
        );
        GroupElement {
            dim,
            m: [[1.0, 0.0], [0.0, if dim == 2 { 1.0 } else { 0.0 }]],
        }
    }

    /// 1×1 element `[s]`. Not checked for orthogonality.
    pub fn scalar(s: f64) -> Self {
        GroupElement {
            dim: 1,
            m: [[s, 0.0], [0.0, 0.0]],
        }
    }

    /// 2×2 element from rows. Not checked for orthogonality.
    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        GroupElement { dim: 2, m: rows }
    }

    pub fn rotation(angle: f64) -> Self {
        let (c, s) = (angle.cos(), angle.sin());
        Self::from_rows([[c, -s], [s, c]])
    }

    /// Rotation by `2π·k/n`.
    pub fn rotation_fraction(k: usize, n: usize) -> Self {
        let (c, s) = turn_fraction(k, n);
        Self::from_rows([[c, -s], [s, c]])
    }

    /// Reflection across the line through the origin at angle `π·k/n`.
    pub fn reflection_fraction(k: usize, n: usize) -> Self {
        let (c, s) = turn_fraction(k, n);
        Self::from_rows([[c, s], [s, -c]])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim);
        self.m[i][j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.m[i][j])
            .collect()
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.dim, other.dim, "dimension mismatch in compose");
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate().take(self.dim) {
            for (j, v) in row.iter_mut().enumerate().take(self.dim) {
                *v = (0..self.dim).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        GroupElement { dim: self.dim, m }
    }

    /// The transpose, which is the inverse for orthogonal matrices.
    pub fn transpose(&self) -> GroupElement {
        let mut m = self.m;
        m[0][1] = self.m[1][0];
        m[1][0] = self.m[0][1];
        GroupElement { dim: self.dim, m }
    }

    pub fn inverse(&self) -> GroupElement {
        self.transpose()
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            _ => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
        }
    }

    /// Apply to a point; for 1D elements only the first coordinate moves.
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        match self.dim {
            1 => [self.m[0][0] * p[0], p[1]],
            _ => [
                self.m[0][0] * p[0] + self.m[0][1] * p[1],
                self.m[1][0] * p[0] + self.m[1][1] * p[1],
            ],
        }
    }

    /// Largest entrywise deviation of `gᵀg` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let gtg = self.transpose().compose(self);
        let id = GroupElement::identity(self.dim);
        gtg.max_entry_diff(&id)
    }

    pub fn max_entry_diff(&self, other: &GroupElement) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }

    pub fn approx_eq(&self, other: &GroupElement, tol: f64) -> bool {
        self.dim == other.dim && self.max_entry_diff(other) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&GroupElement::identity(self.dim), tol)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "[{}]", self.m[0][0]),
            _ => write!(
                f,
                "[[{}, {}], [{}, {}]]",
                self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]
            ),
        }
    }
}

/// Frobenius distance `‖g1 − g2‖_F`.
pub fn group_distance(g1: &GroupElement, g2: &GroupElement) -> Result<f64> {
    if g1.dim != g2.dim {
        return Err(invalid(format!(
            "group_distance: dimension {} vs {}",
            g1.dim, g2.dim
        )));
    }
    let mut s = 0.0;
    for i in 0..g1.dim {
        for j in 0..g1.dim {
            let d = g1.m[i][j] - g2.m[i][j];
            s += d * d;
        }
    }
    Ok(s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Finite,
    /// Uniform N-node quadrature of SO(2); as a set it is C_N.
    So2Quadrature {
        nodes: usize,
    },
}

/// A finite group of orthogonal matrices with Haar weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryGroup {
    elements: Vec<GroupElement>,
    weights: Vec<f64>,
    kind: GroupKind,
    label: String,
}

fn positive(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        Err(invalid(format!("{what}: n must be at least 1")))
    } else {
        Ok(())
    }
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

impl SymmetryGroup {
    /// Build from raw parts without validation; see [`verify_group`].
    pub fn from_parts(
        elements: Vec<GroupElement>,
        weights: Vec<f64>,
        kind: GroupKind,
        label: impl Into<String>,
    ) -> Self {
        SymmetryGroup {
            elements,
            weights,
            kind,
            label: label.into(),
        }
    }

    /// The group containing only the identity.
    pub fn trivial(dim: usize) -> Self {
        Self::from_parts(
            vec![GroupElement::identity(dim)],
            vec![1.0],
            GroupKind::Finite,
            "trivial",
        )
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements.first().map_or(0, |g| g.dim)
    }

    /// Index of the listed element matching `g` within [`MATCH_TOL`].
    pub fn find(&self, g: &GroupElement) -> Option<usize> {
        self.elements.iter().position(|e| e.approx_eq(g, MATCH_TOL))
    }

    /// The permutation `j ↦ index(e_i · e_j)` realised by left translation.
    /// `None` if some product is missing from the list.
    pub fn left_translation(&self, i: usize) -> Option<Vec<usize>> {
        let gi = self.elements[i];
        self.elements
            .iter()
            .map(|gj| self.find(&gi.compose(gj)))
            .collect()
    }

    /// Parse `cyclic:n`, `dihedral:n`, `reflect1d`, `so2:N` (or bare `so2`)
    /// and `trivial:d`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        spec.parse()
    }
}

impl FromStr for SymmetryGroup {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let count = |arg: Option<&str>| -> Result<usize> {
            arg.ok_or_else(|| invalid(format!("group spec '{spec}' needs a count")))?
                .parse::<usize>()
                .map_err(|e| invalid(format!("group spec '{spec}': {e}")))
        };
        match name {
            "cyclic" => make_cyclic(count(arg)?),
            "dihedral" => make_dihedral(count(arg)?),
            "reflect1d" if arg.is_none() => Ok(make_reflection_1d()),
            "so2" => make_so2_quadrature(arg.map_or(Ok(DEFAULT_SO2_NODES), |a| count(Some(a)))?),
            "trivial" => {
                let d = arg.map_or(Ok(2), |a| count(Some(a)))?;
                if d == 1 || d == 2 {
                    Ok(SymmetryGroup::trivial(d))
                } else {
                    Err(invalid(format!("trivial group dimension {d} unsupported")))
                }
            }
            _ => Err(invalid(format!("unknown group spec '{spec}'"))),
        }
    }
}

/// C_n: rotations by `2πk/n`, `k = 0..n`.
pub fn make_cyclic(n: usize) -> Result<SymmetryGroup> {
    positive(n, "make_cyclic")?;
    let elements = (0..n)
        .map(|k| GroupElement::rotation_fraction(k, n))
        .collect();
    Ok(SymmetryGroup::from_parts(
        elements,
        uniform(n),
        GroupKind::Finite,
        format!("cyclic:{n}"),
    ))
}

/// D_n: `n` rotations followed by `n` reflections, the first reflection
/// being across the x-axis.
pub fn make_dihedral(n: usize) -> Result<SymmetryGroup> {
    positive(n, "make_dihedral")?;
    let mut elements: Vec<_> = (0..n)
        .map(|k| GroupElement::rotation_fraction(k, n))
        .collect();
    elements.extend((0..n).map(|k| GroupElement::reflection_fraction(k, n)));
    Ok(SymmetryGroup::from_parts(
        elements,
        uniform(2 * n),
        GroupKind::Finite,
        format!("dihedral:{n}"),
    ))
}

/// O(1) = {[1], [−1]}.
pub fn make_reflection_1d() -> SymmetryGroup {
    SymmetryGroup::from_parts(
        vec![GroupElement::scalar(1.0), GroupElement::scalar(-1.0)],
        uniform(2),
        GroupKind::Finite,
        "reflect1d",
    )
}

/// N-node uniform quadrature of SO(2), i.e. C_N tagged as a quadrature.
pub fn make_so2_quadrature(nodes: usize) -> Result<SymmetryGroup> {
    positive(nodes, "make_so2_quadrature")?;
    let elements = (0..nodes)
        .map(|k| GroupElement::rotation_fraction(k, nodes))
        .collect();
    Ok(SymmetryGroup::from_parts(
        elements,
        uniform(nodes),
        GroupKind::So2Quadrature { nodes },
        format!("so2:{nodes}"),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum GroupViolation {
    Empty,
    DimensionMismatch {
        index: usize,
        dim: usize,
    },
    WeightCount {
        elements: usize,
        weights: usize,
    },
    NonPositiveWeight {
        index: usize,
        weight: f64,
    },
    /// `|Σ w − 1|`.
    Normalization {
        magnitude: f64,
    },
    /// `max w − min w`.
    NonUniformWeights {
        magnitude: f64,
    },
    NotOrthogonal {
        index: usize,
        magnitude: f64,
    },
    Determinant {
        index: usize,
        magnitude: f64,
    },
    /// `e_left · e_right` has no match; `magnitude` is the distance to the
    /// nearest listed element.
    MissingProduct {
        left: usize,
        right: usize,
        magnitude: f64,
    },
    MissingInverse {
        index: usize,
        magnitude: f64,
    },
    /// A quadrature node is not the rotation by `2πk/N`.
    QuadratureNode {
        index: usize,
        magnitude: f64,
    },
}

impl fmt::Display for GroupViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

fn nearest(group: &SymmetryGroup, g: &GroupElement) -> f64 {
    group
        .elements
        .iter()
        .map(|e| e.max_entry_diff(g))
        .fold(f64::INFINITY, f64::min)
}

/// Check every group invariant; an empty report means the group is valid.
pub fn verify_group(group: &SymmetryGroup) -> Vec<GroupViolation> {
    let mut out = Vec::new();
    if group.is_empty() {
        out.push(GroupViolation::Empty);
        return out;
    }
    let dim = group.dim();
    for (index, g) in group.elements.iter().enumerate() {
        if g.dim != dim {
            out.push(GroupViolation::DimensionMismatch { index, dim: g.dim });
        }
    }
    if !out.is_empty() {
        return out;
    }

    let w = &group.weights;
    if w.len() != group.len() {
        out.push(GroupViolation::WeightCount {
            elements: group.len(),
            weights: w.len(),
        });
    } else {
        for (index, &weight) in w.iter().enumerate() {
            if weight.is_nan() || weight <= 0.0 {
                out.push(GroupViolation::NonPositiveWeight { index, weight });
            }
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > ORTHOGONALITY_TOL {
            out.push(GroupViolation::Normalization {
                magnitude: (total - 1.0).abs(),
            });
        }
        let (lo, hi) = w
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if hi - lo > ORTHOGONALITY_TOL {
            out.push(GroupViolation::NonUniformWeights { magnitude: hi - lo });
        }
    }

    for (index, g) in group.elements.iter().enumerate() {
        let defect = g.orthogonality_defect();
        if defect > ORTHOGONALITY_TOL {
            out.push(GroupViolation::NotOrthogonal {
                index,
                magnitude: defect,
            });
        }
        let det_defect = (g.det().abs() - 1.0).abs();
        if det_defect > ORTHOGONALITY_TOL {
            out.push(GroupViolation::Determinant {
                index,
                magnitude: det_defect,
            });
        }
    }

    for (left, a) in group.elements.iter().enumerate() {
        for (right, b) in group.elements.iter().enumerate() {
            let prod = a.compose(b);
            let magnitude = nearest(group, &prod);
            if magnitude > MATCH_TOL {
                out.push(GroupViolation::MissingProduct {
                    left,
                    right,
                    magnitude,
                });
            }
        }
        let magnitude = nearest(group, &a.inverse());
        if magnitude > MATCH_TOL {
            out.push(GroupViolation::MissingInverse {
                index: left,
                magnitude,
            });
        }
    }

    if let GroupKind::So2Quadrature { nodes } = group.kind {
        for (index, g) in group.elements.iter().enumerate() {
            let expected = GroupElement::rotation_fraction(index, nodes);
            let magnitude = if g.dim == 2 && group.len() == nodes {
                g.max_entry_diff(&expected)
            } else {
                f64::INFINITY
            };
            if magnitude > MATCH_TOL {
                out.push(GroupViolation::QuadratureNode { index, magnitude });
            }
        }
    }
    out
}

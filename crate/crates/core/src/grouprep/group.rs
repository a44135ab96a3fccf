use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::spinalg::{pauli, SpinContext};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Closure cap for generated point groups.
pub const MAX_GROUP_ORDER: usize = 96;

const MATRIX_TOL: f64 = 1e-9;

/// An O(3) symmetry operation.
#[derive(Debug, Clone)]
pub struct GeometricElement {
    pub label: String,
    pub matrix: Matrix3<f64>,
    pub proper: bool,
    /// Axis and angle of the proper part `det(R)·R`, angle in `[0, 2π)`.
    pub axis: [f64; 3],
    pub angle: f64,
}

impl GeometricElement {
    fn new(matrix: Matrix3<f64>) -> Self {
        let det = matrix.determinant();
        let proper = det > 0.0;
        let q = if proper { matrix } else { -matrix };
        let (axis, angle) = linalg::canonical_axis_angle(&q);
        let label = element_label(proper, axis, angle);
        Self { label, matrix, proper, axis, angle }
    }

    /// Apply to a vector of length 2 or 3 (planar vectors embed at z = 0).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let w = nalgebra::Vector3::new(v[0], v[1], if v.len() > 2 { v[2] } else { 0.0 });
        let r = self.matrix * w;
        r.iter().take(v.len()).copied().collect()
    }

    pub fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        let w = nalgebra::Vector3::new(v[0], v[1], if v.len() > 2 { v[2] } else { 0.0 });
        let r = self.matrix.transpose() * w;
        r.iter().take(v.len()).copied().collect()
    }
}

fn element_label(proper: bool, axis: [f64; 3], angle: f64) -> String {
    let deg = (angle * 180.0 / PI).round() as i64;
    let axis_name = match axis {
        [a, b, c] if (a - 1.0).abs() < 1e-9 && b.abs() < 1e-9 && c.abs() < 1e-9 => "x".to_string(),
        [a, b, c] if a.abs() < 1e-9 && (b - 1.0).abs() < 1e-9 && c.abs() < 1e-9 => "y".to_string(),
        [a, b, c] if a.abs() < 1e-9 && b.abs() < 1e-9 && (c - 1.0).abs() < 1e-9 => "z".to_string(),
        [a, b, c] => format!("{a:.4};{b:.4};{c:.4}"),
    };
    match (proper, deg) {
        (true, 0) => "e".to_string(),
        (false, 0) => "I".to_string(),
        (true, _) => format!("R({axis_name},{deg})"),
        (false, _) => format!("IR({axis_name},{deg})"),
    }
}

/// Element of a (possibly double) group: a geometric operation, the ē flag
/// and the chosen spin lift at the group's spin.
#[derive(Debug, Clone)]
pub struct DoubleGroupElement {
    pub geo: usize,
    /// `+1` for Γ, `-1` for ēΓ.
    pub sign: i8,
    pub spin_lift: CMatrix,
    pub label: String,
}

/// Group family descriptor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind")]
pub enum GroupSpec {
    /// Cyclic rotations by `2π/n` about `axis`.
    Cn {
        n: usize,
        #[serde(default = "default_axis")]
        axis: [f64; 3],
    },
    /// `Cn` plus mirror planes containing the axis; one mirror has normal
    /// `mirror_normal` (perpendicular to `axis`).
    Cnv {
        n: usize,
        #[serde(default = "default_axis")]
        axis: [f64; 3],
        #[serde(default = "default_mirror_normal")]
        mirror_normal: [f64; 3],
    },
    /// `Cn` about `axis` plus a two-fold axis along `secondary_axis`.
    Dn {
        n: usize,
        #[serde(default = "default_axis")]
        axis: [f64; 3],
        #[serde(default = "default_secondary_axis")]
        secondary_axis: [f64; 3],
    },
    /// Arbitrary orthogonal generators, row-major 3×3.
    Custom { generators: Vec<[[f64; 3]; 3]> },
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_mirror_normal() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_secondary_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl GroupSpec {
    pub fn generators(&self) -> Result<Vec<Matrix3<f64>>> {
        match self {
            GroupSpec::Cn { n, axis } => {
                check_n(*n)?;
                Ok(vec![linalg::rotation_matrix(*axis, 2.0 * PI / *n as f64)])
            }
            GroupSpec::Cnv { n, axis, mirror_normal } => {
                check_n(*n)?;
                Ok(vec![linalg::rotation_matrix(*axis, 2.0 * PI / *n as f64), reflection(*mirror_normal)])
            }
            GroupSpec::Dn { n, axis, secondary_axis } => {
                check_n(*n)?;
                Ok(vec![
                    linalg::rotation_matrix(*axis, 2.0 * PI / *n as f64),
                    linalg::rotation_matrix(*secondary_axis, PI),
                ])
            }
            GroupSpec::Custom { generators } => Ok(generators
                .iter()
                .map(|rows| Matrix3::from_fn(|i, j| rows[i][j]))
                .collect()),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("group order parameter n must be ≥ 1".into()));
    }
    Ok(())
}

/// Householder reflection through the plane with the given normal.
pub fn reflection(normal: [f64; 3]) -> Matrix3<f64> {
    let n = nalgebra::Vector3::from(normal).normalize();
    Matrix3::identity() - 2.0 * n * n.transpose()
}

/// A finite group with an O(3) action and spin lifts at spin `two_s / 2`.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    pub geometric: Vec<GeometricElement>,
    pub elements: Vec<DoubleGroupElement>,
    pub mult_table: Vec<Vec<usize>>,
    pub identity_index: usize,
    pub is_double: bool,
    /// Indices of the elements forming Γ (sign +1).
    pub geometric_subset: Vec<usize>,
    pub two_s: u32,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// |Γ|.
    pub fn geometric_order(&self) -> usize {
        self.geometric_subset.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult_table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn label(&self, a: usize) -> &str {
        &self.elements[a].label
    }

    /// Index of ē (double groups only).
    pub fn ebar(&self) -> Option<usize> {
        self.is_double.then(|| self.find(0, -1).expect("ē present"))
    }

    /// Element index for (geometric index, sign).
    pub fn find(&self, geo: usize, sign: i8) -> Option<usize> {
        self.elements.iter().position(|e| e.geo == geo && e.sign == sign)
    }

    pub fn geometric_of(&self, a: usize) -> &GeometricElement {
        &self.geometric[self.elements[a].geo]
    }

    /// Drop the ē flag: the Γ representative with the same geometric action.
    pub fn strip_sign(&self, a: usize) -> usize {
        self.find(self.elements[a].geo, 1).expect("Γ representative")
    }

    pub fn power(&self, a: usize, k: usize) -> usize {
        (0..k).fold(self.identity_index, |acc, _| self.mul(acc, a))
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.order();
        (0..n).all(|a| (0..n).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Conjugacy classes as sorted index lists, ordered by smallest member.
    pub fn conjugacy_classes(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut seen = vec![false; n];
        let mut classes = Vec::new();
        for a in 0..n {
            if seen[a] {
                continue;
            }
            let mut class: Vec<usize> = (0..n).map(|g| self.mul(self.mul(g, a), self.inverse(g))).collect();
            class.sort_unstable();
            class.dedup();
            for &x in &class {
                seen[x] = true;
            }
            classes.push(class);
        }
        classes
    }

    /// Exhaustive group-axiom check of the multiplication table.
    pub fn verify_table(&self) -> bool {
        let n = self.order();
        let e = self.identity_index;
        for a in 0..n {
            if self.mul(e, a) != a || self.mul(a, e) != a {
                return false;
            }
            if self.mul(a, self.inverse(a)) != e {
                return false;
            }
            let mut row: Vec<usize> = self.mult_table[a].clone();
            row.sort_unstable();
            if row != (0..n).collect::<Vec<_>>() {
                return false;
            }
            for b in 0..n {
                let ab = self.mul(a, b);
                for c in 0..n {
                    if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Verify the spin lifts form a representation of the table.
    pub fn lift_defect(&self) -> f64 {
        let n = self.order();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let prod = &self.elements[a].spin_lift * &self.elements[b].spin_lift;
                worst = worst.max(linalg::distance(&prod, &self.elements[self.mul(a, b)].spin_lift));
            }
        }
        worst
    }
}

/// Close the generators under multiplication and return the geometric group
/// (spin 0, not doubled).
pub fn build_point_group(spec: &GroupSpec) -> Result<FiniteGroup> {
    let gens = spec.generators()?;
    for (index, g) in gens.iter().enumerate() {
        let residual = (g.transpose() * g - Matrix3::identity()).abs().max();
        if residual > 1e-12 {
            return Err(Error::NonOrthogonalGenerator { index, residual });
        }
        let det = g.determinant();
        if (det.abs() - 1.0).abs() > 1e-12 {
            return Err(Error::NonOrthogonalGenerator { index, residual: (det.abs() - 1.0).abs() });
        }
    }
    let mut mats: Vec<Matrix3<f64>> = vec![Matrix3::identity()];
    let mut frontier = 0;
    while frontier < mats.len() {
        let m = mats[frontier];
        for g in &gens {
            let prod = m * g;
            if !mats.iter().any(|x| (x - prod).abs().max() < MATRIX_TOL) {
                if mats.len() >= MAX_GROUP_ORDER {
                    return Err(Error::ClosureNotReached { cap: MAX_GROUP_ORDER });
                }
                mats.push(prod);
            }
        }
        frontier += 1;
    }
    let mut geometric: Vec<GeometricElement> = mats.into_iter().map(GeometricElement::new).collect();
    geometric.sort_by(canonical_order);
    geometric_group(geometric)
}

/// Identity first, proper before improper, then by axis and angle.
fn canonical_order(a: &GeometricElement, b: &GeometricElement) -> std::cmp::Ordering {
    let key = |g: &GeometricElement| {
        let is_id = g.proper && g.angle == 0.0;
        let r = |x: f64| (x * 1e6).round() as i64;
        (
            !is_id,
            !g.proper,
            [r(g.axis[0]), r(g.axis[1]), r(g.axis[2])],
            r(g.angle),
        )
    };
    key(a).cmp(&key(b))
}

fn find_matrix(geometric: &[GeometricElement], m: &Matrix3<f64>) -> Result<usize> {
    geometric
        .iter()
        .position(|g| (g.matrix - m).abs().max() < MATRIX_TOL)
        .ok_or_else(|| Error::InconsistentLift("product left the group".into()))
}

fn geometric_group(geometric: Vec<GeometricElement>) -> Result<FiniteGroup> {
    let n = geometric.len();
    let mut mult_table = vec![vec![0; n]; n];
    for a in 0..n {
        for b in 0..n {
            mult_table[a][b] = find_matrix(&geometric, &(geometric[a].matrix * geometric[b].matrix))?;
        }
    }
    let elements = geometric
        .iter()
        .enumerate()
        .map(|(i, g)| DoubleGroupElement {
            geo: i,
            sign: 1,
            spin_lift: linalg::identity(1),
            label: g.label.clone(),
        })
        .collect();
    Ok(finish(geometric, elements, mult_table, false, 0))
}

fn finish(
    geometric: Vec<GeometricElement>,
    elements: Vec<DoubleGroupElement>,
    mult_table: Vec<Vec<usize>>,
    is_double: bool,
    two_s: u32,
) -> FiniteGroup {
    let n = elements.len();
    let identity_index = 0;
    let inverse = (0..n)
        .map(|a| (0..n).find(|&b| mult_table[a][b] == identity_index).expect("inverse"))
        .collect();
    let geometric_subset = (0..n).filter(|&i| elements[i].sign == 1).collect();
    FiniteGroup { geometric, elements, mult_table, identity_index, is_double, geometric_subset, two_s, inverse }
}

/// Spin-½ lift `exp(-iθ n·σ/2)` of the proper part of an O(3) element.
pub fn su2_lift(g: &GeometricElement) -> CMatrix {
    let (sx, sy, sz) = pauli();
    let gen = (sx * c(g.axis[0], 0.0) + sy * c(g.axis[1], 0.0) + sz * c(g.axis[2], 0.0)) * c(0.5, 0.0);
    linalg::expm_hermitian(&gen, g.angle)
}

/// Lift a geometric group to spin `two_s / 2`.
///
/// Half-integer spin doubles the group to Γ ∪ ēΓ, with the sign of products
/// read off from the SU(2) lifts; integer spin returns Γ with single-valued
/// lifts.
pub fn build_double_group(gamma: &FiniteGroup, two_s: u32) -> Result<FiniteGroup> {
    if gamma.is_double {
        return Err(Error::InvalidParameter("input group is already a double group".into()));
    }
    let geometric = gamma.geometric.clone();
    let ctx = SpinContext::new(two_s);
    let lift_at_spin = |g: &GeometricElement| -> CMatrix {
        ctx.spin_rotation(g.axis, g.angle).expect("canonical axis is a unit vector")
    };
    let ng = geometric.len();
    if two_s % 2 == 0 {
        let mut group = gamma.clone();
        for e in group.elements.iter_mut() {
            e.spin_lift = lift_at_spin(&geometric[e.geo]);
        }
        group.two_s = two_s;
        return Ok(group);
    }

    let half: Vec<CMatrix> = geometric.iter().map(su2_lift).collect();
    // product signs: U(a)U(b) = σ(a,b) U(ab)
    let mut sigma = vec![vec![1i8; ng]; ng];
    for a in 0..ng {
        for b in 0..ng {
            let ab = gamma.mult_table[a][b];
            let prod = &half[a] * &half[b];
            let plus = linalg::distance(&prod, &half[ab]);
            let minus = linalg::distance(&prod, &(-half[ab].clone()));
            sigma[a][b] = if plus < 1e-8 {
                1
            } else if minus < 1e-8 {
                -1
            } else {
                return Err(Error::InconsistentLift(format!(
                    "lift of {}·{} is neither ± lift of {}",
                    geometric[a].label, geometric[b].label, geometric[ab].label
                )));
            };
        }
    }
    let mut elements = Vec::with_capacity(2 * ng);
    for sign in [1i8, -1] {
        for (i, g) in geometric.iter().enumerate() {
            let lift = lift_at_spin(g) * c(sign as f64, 0.0);
            let label = if sign == 1 { g.label.clone() } else { format!("-{}", g.label) };
            elements.push(DoubleGroupElement { geo: i, sign, spin_lift: lift, label });
        }
    }
    let index = |geo: usize, sign: i8| if sign == 1 { geo } else { geo + ng };
    let n = 2 * ng;
    let mut mult_table = vec![vec![0; n]; n];
    for x in 0..n {
        for y in 0..n {
            let (ex, ey) = (&elements[x], &elements[y]);
            let ab = gamma.mult_table[ex.geo][ey.geo];
            let s = ex.sign * ey.sign * sigma[ex.geo][ey.geo];
            mult_table[x][y] = index(ab, s);
        }
    }
    let group = finish(geometric, elements, mult_table, true, two_s);
    if !group.verify_table() {
        return Err(Error::InconsistentLift("signed table is not a group".into()));
    }
    Ok(group)
}

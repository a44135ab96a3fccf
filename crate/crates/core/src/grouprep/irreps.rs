use super::group::FiniteGroup;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, I};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;

const CLUSTER_TOL: f64 = 1e-7;
const MAX_ATTEMPTS: usize = 8;

/// Unitary intertwiner `Z` with `ρ* = Z ρ Z⁻¹` and the sign of `Z Z*`.
#[derive(Debug, Clone)]
pub struct Intertwiner {
    pub z: CMatrix,
    pub sign: i32,
}

#[derive(Debug, Clone)]
pub struct Irrep {
    pub label: String,
    pub dimension: usize,
    pub matrices: Vec<CMatrix>,
    pub characters: Vec<Complex64>,
    pub fs_indicator: i32,
    /// `χ(ē)/s` for irreps of double groups.
    pub kappa: Option<i32>,
    pub intertwiner: Option<Intertwiner>,
}

impl Irrep {
    pub fn character(&self, g: usize) -> Complex64 {
        self.characters[g]
    }

    pub fn is_extra(&self) -> bool {
        self.kappa == Some(-1)
    }
}

/// Left-regular permutation matrices `L(g) e_h = e_{gh}`.
fn left_regular(group: &FiniteGroup) -> Vec<CMatrix> {
    let n = group.order();
    (0..n)
        .map(|g| {
            let mut m = CMatrix::zeros(n, n);
            for h in 0..n {
                m[(group.mul(g, h), h)] = c(1.0, 0.0);
            }
            m
        })
        .collect()
}

/// Right-regular permutation matrices `R(g) e_h = e_{h g⁻¹}`.
fn right_regular(group: &FiniteGroup) -> Vec<CMatrix> {
    let n = group.order();
    (0..n)
        .map(|g| {
            let gi = group.inverse(g);
            let mut m = CMatrix::zeros(n, n);
            for h in 0..n {
                m[(group.mul(h, gi), h)] = c(1.0, 0.0);
            }
            m
        })
        .collect()
}

/// Group eigenpairs into clusters of (numerically) equal eigenvalues.
fn clusters(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match out.last_mut() {
            Some(last) if (values[idx] - values[*last.last().unwrap()]).abs() < tol => last.push(idx),
            _ => out.push(vec![idx]),
        }
    }
    out
}

fn columns(v: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(v.nrows(), cols.len(), |i, j| v[(i, cols[j])])
}

/// Complete set of irreps of `group`.
///
/// Isotypic components of the regular representation are separated by a
/// random Hermitian combination of class-sum operators; characters follow
/// from traces against the isotypic projectors, and representation matrices
/// from splitting each component with the commuting right-regular action.
pub fn character_table(group: &FiniteGroup, seed: u64) -> Result<Vec<Irrep>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_reason = String::new();
    for _ in 0..MAX_ATTEMPTS {
        match try_character_table(group, &mut rng) {
            Ok(mut irreps) => {
                sort_irreps(&mut irreps);
                for (k, irrep) in irreps.iter_mut().enumerate() {
                    irrep.label = k.to_string();
                }
                return Ok(irreps);
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::CharacterTable { attempts: MAX_ATTEMPTS, reason: last_reason })
}

fn try_character_table(group: &FiniteGroup, rng: &mut ChaCha8Rng) -> std::result::Result<Vec<Irrep>, String> {
    let n = group.order();
    let classes = group.conjugacy_classes();
    let left = left_regular(group);
    let mut h = CMatrix::zeros(n, n);
    for class in &classes {
        let mut k = CMatrix::zeros(n, n);
        for &g in class {
            k += &left[g];
        }
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let kd = k.adjoint();
        h += (&k + &kd) * c(a, 0.0) + (&k - &kd) * (I * b);
    }
    let eig = SymmetricEigen::new(h);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let groups = clusters(&values, CLUSTER_TOL);
    if groups.len() != classes.len() {
        return Err(format!("{} eigenvalue clusters for {} classes", groups.len(), classes.len()));
    }
    let abelian = group.is_abelian();
    let right = if abelian { Vec::new() } else { right_regular(group) };
    let mut irreps = Vec::with_capacity(groups.len());
    for cols in &groups {
        let d = cols.len();
        let s = (d as f64).sqrt().round() as usize;
        if s * s != d {
            return Err(format!("isotypic dimension {d} is not a square"));
        }
        let basis = columns(&eig.eigenvectors, cols);
        let proj = &basis * basis.adjoint();
        let characters: Vec<Complex64> = left
            .iter()
            .map(|l| snap(linalg::trace(&(l * &proj)) / s as f64))
            .collect();
        let matrices = if s == 1 {
            characters.iter().map(|&x| CMatrix::from_element(1, 1, x)).collect()
        } else {
            split_isotypic(&basis, s, &left, &right, rng)?
        };
        irreps.push(Irrep {
            label: String::new(),
            dimension: s,
            matrices,
            characters,
            fs_indicator: 0,
            kappa: None,
            intertwiner: None,
        });
    }
    let total: usize = irreps.iter().map(|r| r.dimension * r.dimension).sum();
    if total != n {
        return Err(format!("Σ s² = {total} ≠ |G| = {n}"));
    }
    for irrep in irreps.iter_mut() {
        if homomorphism_defect(group, &irrep.matrices) > 1e-10 {
            return Err("reconstructed matrices are not a representation".into());
        }
        irrep.fs_indicator = super::frobenius_schur(irrep, group);
        if group.is_double {
            let ebar = group.ebar().expect("double group has ē");
            let kappa = irrep.characters[ebar].re / irrep.dimension as f64;
            if (kappa.abs() - 1.0).abs() > 1e-10 {
                return Err(format!("κ = {kappa} is not ±1"));
            }
            irrep.kappa = Some(kappa.signum() as i32);
        }
    }
    Ok(irreps)
}

fn split_isotypic(
    basis: &CMatrix,
    s: usize,
    left: &[CMatrix],
    right: &[CMatrix],
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<CMatrix>, String> {
    let n = basis.nrows();
    let mut b = CMatrix::zeros(n, n);
    for r in right {
        b += r * c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let a = &b + b.adjoint();
    let restricted = basis.adjoint() * a * basis;
    let eig = SymmetricEigen::new(restricted);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let groups = clusters(&values, CLUSTER_TOL);
    if groups.len() != s || groups.iter().any(|g| g.len() != s) {
        return Err("right-regular action did not split the isotypic component".into());
    }
    let copy = basis * columns(&eig.eigenvectors, &groups[0]);
    Ok(left.iter().map(|l| copy.adjoint() * l * &copy).collect())
}

fn snap(z: Complex64) -> Complex64 {
    let f = |x: f64| if x.abs() < 1e-13 { 0.0 } else { x };
    Complex64::new(f(z.re), f(z.im))
}

/// `max |ρ(a)ρ(b) - ρ(ab)|` over all pairs.
pub fn homomorphism_defect(group: &FiniteGroup, mats: &[CMatrix]) -> f64 {
    let n = group.order();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            worst = worst.max(linalg::distance(&(&mats[a] * &mats[b]), &mats[group.mul(a, b)]));
        }
    }
    worst
}

/// Dimension first, then character phases element by element.
fn sort_irreps(irreps: &mut [Irrep]) {
    let phase = |z: Complex64| {
        if z.norm() < 1e-9 {
            return (1, 0.0, 0.0);
        }
        let mut a = z.arg();
        if a < -1e-9 {
            a += 2.0 * std::f64::consts::PI;
        }
        (0, a.max(0.0), -z.norm())
    };
    irreps.sort_by(|x, y| {
        x.dimension.cmp(&y.dimension).then_with(|| {
            for (&a, &b) in x.characters.iter().zip(&y.characters) {
                let (pa, pb) = (phase(a), phase(b));
                let ord = pa
                    .0
                    .cmp(&pb.0)
                    .then_with(|| cmp_tol(pa.1, pb.1))
                    .then_with(|| cmp_tol(pa.2, pb.2));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    });
}

fn cmp_tol(a: f64, b: f64) -> Ordering {
    if (a - b).abs() < 1e-7 {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

//! Small dense complex linear algebra used throughout the crate.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn distance(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

/// `max |U†U - 1|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    distance(&(u.adjoint() * u), &identity(u.nrows()))
}

pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    distance(h, &h.adjoint())
}

pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `exp(-i t H)` for Hermitian `H`, via its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let phases = CMatrix::from_diagonal(&DVector::from_iterator(
        h.nrows(),
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -t * l)),
    ));
    v * phases * v.adjoint()
}

/// Unitary factor of the polar decomposition `A = U P`.
pub fn polar_unitary(a: &CMatrix) -> CMatrix {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

/// Smallest singular value.
pub fn min_singular_value(a: &CMatrix) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Axis-angle of a proper rotation with angle in `[0, π]` (axis sign fixed at π).
///
/// For angle π the axis is chosen with its first nonzero component positive;
/// the returned angle lies in `[0, 2π)` after [`canonical_axis_angle`].
pub fn rotation_axis_angle(r: &Matrix3<f64>) -> ([f64; 3], f64) {
    let tr = r.trace();
    let cos = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return ([0.0, 0.0, 1.0], 0.0);
    }
    let w = [r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]];
    let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if wn > 1e-8 {
        return ([w[0] / wn, w[1] / wn, w[2] / wn], angle);
    }
    // angle ≈ π: R = 2nnᵀ - 1
    let b = (r + Matrix3::identity()) / 2.0;
    let mut best = 0;
    for k in 1..3 {
        if b[(k, k)] > b[(best, best)] {
            best = k;
        }
    }
    let nb = b[(best, best)].max(0.0).sqrt();
    let mut n = [b[(0, best)] / nb, b[(1, best)] / nb, b[(2, best)] / nb];
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    for x in n.iter_mut() {
        *x /= norm;
    }
    (n, std::f64::consts::PI)
}

/// Axis-angle with the axis oriented so its first nonzero component is
/// positive and the angle in `[0, 2π)`.
pub fn canonical_axis_angle(r: &Matrix3<f64>) -> ([f64; 3], f64) {
    let (mut n, mut angle) = rotation_axis_angle(r);
    if angle == 0.0 {
        return ([0.0, 0.0, 1.0], 0.0);
    }
    let lead = n.iter().find(|x| x.abs() > 1e-9).copied().unwrap_or(1.0);
    if lead < 0.0 {
        n = [-n[0], -n[1], -n[2]];
        angle = 2.0 * std::f64::consts::PI - angle;
    }
    // remove signed zeros for stable labels
    for x in n.iter_mut() {
        if x.abs() < 1e-14 {
            *x = 0.0;
        }
    }
    (n, angle)
}

pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let n = nalgebra::Unit::new_normalize(nalgebra::Vector3::from(axis));
    *nalgebra::Rotation3::from_axis_angle(&n, angle).matrix()
}

//! Spin-S matrix algebra in units where ħ = 1.
//!
//! Time reversal uses the σ_y convention `T = exp(iπ S_y) K`: complex
//! conjugation flips `S_y`, the rotation by π about y flips `S_x` and `S_z`.
//! Other Pauli conventions would permute these roles.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, I};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Spin quantum number stored as `2S` together with the spin matrices.
#[derive(Debug, Clone)]
pub struct SpinContext {
    two_s: u32,
    sx: CMatrix,
    sy: CMatrix,
    sz: CMatrix,
}

impl SpinContext {
    pub fn new(two_s: u32) -> Self {
        let dim = two_s as usize + 1;
        let s = two_s as f64 / 2.0;
        let mut sz = CMatrix::zeros(dim, dim);
        let mut sp = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            let m = s - i as f64;
            sz[(i, i)] = c(m, 0.0);
            if i > 0 {
                // <m+1| S+ |m>, row i-1 holds m+1
                sp[(i - 1, i)] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let sm = sp.adjoint();
        let sx = (&sp + &sm) * c(0.5, 0.0);
        let sy = (&sp - &sm) * c(0.0, -0.5);
        Self { two_s, sx, sy, sz }
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    pub fn is_half_integer(&self) -> bool {
        self.two_s % 2 == 1
    }

    pub fn sx(&self) -> &CMatrix {
        &self.sx
    }

    pub fn sy(&self) -> &CMatrix {
        &self.sy
    }

    pub fn sz(&self) -> &CMatrix {
        &self.sz
    }

    /// `S·v` for a real 3-vector.
    pub fn dot(&self, v: [f64; 3]) -> CMatrix {
        &self.sx * c(v[0], 0.0) + &self.sy * c(v[1], 0.0) + &self.sz * c(v[2], 0.0)
    }

    /// `exp(-iθ S·n)`.
    pub fn spin_rotation(&self, n: [f64; 3], theta: f64) -> Result<CMatrix> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NonUnitAxis { norm });
        }
        Ok(linalg::expm_hermitian(&self.dot(n), theta))
    }

    /// Matrix factor `exp(iπ S_y)` of the conventional time-reversal operator.
    pub fn time_reversal_matrix(&self) -> CMatrix {
        linalg::expm_hermitian(&self.sy, -PI)
    }

    /// Sign of `T²`, read off from the scalar that `exp(i2π S_y)` equals.
    pub fn time_reversal_square_sign(&self) -> i32 {
        let m = linalg::expm_hermitian(&self.sy, -2.0 * PI);
        let z = m[(0, 0)];
        debug_assert!(linalg::distance(&m, &(linalg::identity(self.dim()) * z)) < 1e-12);
        if z.re > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Outcome of the spin-½ antiunitary classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntiunitaryClass {
    /// `a0 = a_x = a_z = 0`: the extra spin part is trivial.
    ConventionalEquivalent,
    /// `a_y = 0`: the S_y rotation is removed from T entirely.
    RotationRemoved,
    /// `(U K)²` is not proportional to the identity.
    Invalid,
}

/// Classify `U = a0·1 + i a·σ` (the total spin part of an antiunitary
/// `T = U K`) by whether `T²` can be `±1`.
pub fn classify_antiunitary_spin_part(a0: f64, a: [f64; 3]) -> Result<AntiunitaryClass> {
    let norm_sq = a0 * a0 + a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitarySpinPart { norm_sq });
    }
    let tol = 1e-10;
    let (sx, sy, sz) = pauli();
    let u = linalg::identity(2) * c(a0, 0.0) + (sx * c(a[0], 0.0) + sy * c(a[1], 0.0) + sz * c(a[2], 0.0)) * I;
    let square = &u * linalg::conj(&u);
    let scalar = square[(0, 0)];
    let proportional = linalg::distance(&square, &(linalg::identity(2) * scalar)) < 1e-9;
    if !proportional {
        return Ok(AntiunitaryClass::Invalid);
    }
    if a0.abs() < tol && a[0].abs() < tol && a[2].abs() < tol {
        Ok(AntiunitaryClass::ConventionalEquivalent)
    } else if a[1].abs() < tol {
        Ok(AntiunitaryClass::RotationRemoved)
    } else {
        // proportional without either branch cannot happen for unitary U
        Ok(AntiunitaryClass::Invalid)
    }
}

/// Pauli matrices σ_x, σ_y, σ_z.
pub fn pauli() -> (CMatrix, CMatrix, CMatrix) {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let sx = CMatrix::from_row_slice(2, 2, &[z, o, o, z]);
    let sy = CMatrix::from_row_slice(2, 2, &[z, -I, I, z]);
    let sz = CMatrix::from_row_slice(2, 2, &[o, z, z, -o]);
    (sx, sy, sz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance, identity};

    fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn commutation_relations_and_casimir() {
        for two_s in 0..6 {
            let ctx = SpinContext::new(two_s);
            let s = ctx.spin();
            assert!(distance(&comm(ctx.sx(), ctx.sy()), &(ctx.sz() * I)) < 1e-12);
            assert!(distance(&comm(ctx.sy(), ctx.sz()), &(ctx.sx() * I)) < 1e-12);
            assert!(distance(&comm(ctx.sz(), ctx.sx()), &(ctx.sy() * I)) < 1e-12);
            let cas = ctx.sx() * ctx.sx() + ctx.sy() * ctx.sy() + ctx.sz() * ctx.sz();
            assert!(distance(&cas, &(identity(ctx.dim()) * c(s * (s + 1.0), 0.0))) < 1e-12);
            for i in 0..ctx.dim() {
                assert!((ctx.sz()[(i, i)].re - (s - i as f64)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_pi_rotation_flips_half_integer_spin() {
        let half = SpinContext::new(1);
        let u = half.spin_rotation([0.0, 0.0, 1.0], 2.0 * PI).unwrap();
        assert!(distance(&u, &(-identity(2))) < 1e-12);
    }

    #[test]
    fn zero_angle_is_identity() {
        for two_s in 0..4 {
            let ctx = SpinContext::new(two_s);
            let n = [0.6, 0.0, 0.8];
            assert!(distance(&ctx.spin_rotation(n, 0.0).unwrap(), &identity(ctx.dim())) < 1e-14);
        }
    }

    #[test]
    fn quarter_turn_about_z_is_diagonal() {
        let ctx = SpinContext::new(1);
        let u = ctx.spin_rotation([0.0, 0.0, 1.0], PI / 2.0).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, -PI / 4.0),
            Complex64::from_polar(1.0, PI / 4.0),
        ]));
        assert!(distance(&u, &expected) < 1e-14);
    }

    #[test]
    fn non_unit_axis_rejected() {
        let ctx = SpinContext::new(1);
        assert!(matches!(
            ctx.spin_rotation([1.0, 1.0, 0.0], 1.0),
            Err(Error::NonUnitAxis { .. })
        ));
    }

    #[test]
    fn time_reversal_signs() {
        assert_eq!(SpinContext::new(0).time_reversal_square_sign(), 1);
        assert_eq!(SpinContext::new(1).time_reversal_square_sign(), -1);
        assert_eq!(SpinContext::new(2).time_reversal_square_sign(), 1);
        assert_eq!(SpinContext::new(3).time_reversal_square_sign(), -1);
    }

    #[test]
    fn time_reversal_matrix_spin_half_is_i_sigma_y() {
        let ctx = SpinContext::new(1);
        let m = ctx.time_reversal_matrix();
        let (_, sy, _) = pauli();
        // exp(iπσ_y/2) = iσ_y
        assert!(distance(&m, &(sy * I)) < 1e-12);
        for z in m.iter() {
            let a = z.norm();
            assert!(a < 1e-12 || (a - 1.0).abs() < 1e-12);
        }
        assert!(distance(&ctx.time_reversal_matrix(), &identity(2)).is_finite());
        assert!(distance(&SpinContext::new(0).time_reversal_matrix(), &identity(1)) < 1e-14);
    }

    #[test]
    fn time_reversal_flips_spin_one() {
        let ctx = SpinContext::new(2);
        let m = ctx.time_reversal_matrix();
        let minv = m.adjoint();
        for s in [ctx.sx(), ctx.sy(), ctx.sz()] {
            let flipped = &m * linalg::conj(s) * &minv;
            assert!(distance(&flipped, &(-s.clone())) < 1e-12);
        }
    }

    #[test]
    fn time_reversal_square_matches_matrix_product() {
        for two_s in 0..5 {
            let ctx = SpinContext::new(two_s);
            let m = ctx.time_reversal_matrix();
            let sq = &m * linalg::conj(&m);
            let sign = ctx.time_reversal_square_sign() as f64;
            assert!(distance(&sq, &(identity(ctx.dim()) * c(sign, 0.0))) < 1e-12);
        }
    }

    #[test]
    fn antiunitary_classification_examples() {
        assert_eq!(
            classify_antiunitary_spin_part(0.0, [0.0, 1.0, 0.0]).unwrap(),
            AntiunitaryClass::ConventionalEquivalent
        );
        assert_eq!(
            classify_antiunitary_spin_part(1.0, [0.0, 0.0, 0.0]).unwrap(),
            AntiunitaryClass::RotationRemoved
        );
        assert_eq!(
            classify_antiunitary_spin_part(0.5, [0.5, 1.0 / 2f64.sqrt(), 0.0]).unwrap(),
            AntiunitaryClass::Invalid
        );
        assert!(classify_antiunitary_spin_part(1.0, [1.0, 0.0, 0.0]).is_err());
    }
}

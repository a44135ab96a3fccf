//! Variational flow, transverse monodromy and Maslov index.
//!
//! The transverse frame at `x₀ = (q, p)` consists of position-like vectors
//! `e_k = (n_k, -m (∇V·n_k)/|p|² p)` and momentum-like vectors
//! `e'_k = (0, n_k)`, with `n_k` an orthonormal basis of the complement of
//! `p` in configuration space. The pairs are symplectically dual and tangent
//! to the energy shell, so the reduced monodromy is symplectic.

use crate::dynamics::{hamilton_rhs, Flow, Model, OdeConfig, PhaseState, Solver};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// End point, action and Jacobian `DΦ_T` of the full-space flow.
#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub final_state: PhaseState,
    pub action: f64,
    pub jacobian: DMatrix<f64>,
    /// Sign changes of the conjugate-point determinant on `(0, T]`.
    pub conjugate_points: usize,
}

/// Integrate the flow and its linearisation. The conjugate-point count uses
/// Jacobi fields started from the momentum-like frame vectors at `x₀`.
pub fn variational_flow(model: &dyn Model, initial: &PhaseState, duration: f64, config: OdeConfig) -> Result<VariationalResult> {
    let f = model.dof();
    let n = 2 * f;
    let base = n + 1;
    let m = model.mass();
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        hamilton_rhs(model, &y[..base], &mut dy[..base]);
        let h = model.hessian(&y[..f]);
        for col in 0..n {
            let v = &y[base + col * n..base + (col + 1) * n];
            let dv = &mut dy[base + col * n..base + (col + 1) * n];
            for i in 0..f {
                dv[i] = v[f + i] / m;
                let mut acc = 0.0;
                for k in 0..f {
                    acc += h[(i, k)] * v[k];
                }
                dv[f + i] = -acc;
            }
        }
    };
    let solver = Solver::new(rhs, config);
    let mut y0 = initial.to_flow_vector();
    y0.resize(base + n * n, 0.0);
    for i in 0..n {
        y0[base + i * n + i] = 1.0;
    }
    let frame = transverse_frame(model, initial)?;
    let kicks: Vec<DVector<f64>> = frame.momentum.clone();
    let mut last_sign = 0.0f64;
    let mut changes = 0usize;
    let (_, y) = solver.run(initial.t, &y0, initial.t + duration, |step| {
        let det = conjugate_determinant(step.y1, f, &kicks);
        if det != 0.0 {
            if last_sign != 0.0 && det.signum() != last_sign {
                changes += 1;
            }
            last_sign = det.signum();
        }
        Ok(Flow::Continue)
    })?;
    let jacobian = DMatrix::from_column_slice(n, n, &y[base..]);
    Ok(VariationalResult {
        final_state: PhaseState::from_flow_vector(&y, f, initial.t + duration),
        action: y[n],
        jacobian,
        conjugate_points: changes,
    })
}

/// `det[v̂, δq_1, …, δq_{f-1}]` for the Jacobi fields `DΦ_t e'_k`.
fn conjugate_determinant(y: &[f64], f: usize, kicks: &[DVector<f64>]) -> f64 {
    let n = 2 * f;
    let base = n + 1;
    let phi = DMatrix::from_column_slice(n, n, &y[base..base + n * n]);
    let mut mat = DMatrix::zeros(f, f);
    let p = DVector::from_column_slice(&y[f..2 * f]);
    let pn = p.norm().max(1e-300);
    for i in 0..f {
        mat[(i, 0)] = p[i] / pn;
    }
    for (k, kick) in kicks.iter().enumerate() {
        let dx = &phi * kick;
        for i in 0..f {
            mat[(i, k + 1)] = dx[i];
        }
    }
    mat.determinant()
}

/// Symplectic transverse frame at a phase-space point.
#[derive(Debug, Clone)]
pub struct TransverseFrame {
    pub flow: DVector<f64>,
    pub position: Vec<DVector<f64>>,
    pub momentum: Vec<DVector<f64>>,
}

pub fn transverse_frame(model: &dyn Model, x: &PhaseState) -> Result<TransverseFrame> {
    let f = model.dof();
    let m = model.mass();
    let p = DVector::from_column_slice(&x.p);
    let p2 = p.norm_squared();
    if p2 < 1e-20 {
        return Err(Error::InvalidParameter("transverse frame undefined at a turning point".into()));
    }
    let mut grad = vec![0.0; f];
    model.gradient(&x.q, &mut grad);
    let grad = DVector::from_vec(grad);
    let normals = complement_basis(&(p.clone() / p2.sqrt()));
    let mut position = Vec::with_capacity(f - 1);
    let mut momentum = Vec::with_capacity(f - 1);
    for nk in &normals {
        let mut e = DVector::zeros(2 * f);
        let mut e2 = DVector::zeros(2 * f);
        let corr = -m * grad.dot(nk) / p2;
        for i in 0..f {
            e[i] = nk[i];
            e[f + i] = corr * p[i];
            e2[f + i] = nk[i];
        }
        position.push(e);
        momentum.push(e2);
    }
    let mut flow = DVector::zeros(2 * f);
    for i in 0..f {
        flow[i] = p[i] / m;
        flow[f + i] = -grad[i];
    }
    Ok(TransverseFrame { flow, position, momentum })
}

/// Orthonormal basis of the complement of the unit vector `u`; for `f = 2`
/// this is `ẑ × u`.
fn complement_basis(u: &DVector<f64>) -> Vec<DVector<f64>> {
    let f = u.len();
    if f == 2 {
        return vec![DVector::from_vec(vec![-u[1], u[0]])];
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in 0..f {
        let mut v = DVector::zeros(f);
        v[k] = 1.0;
        v -= u * u.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let nv = v.norm();
        if nv > 1e-6 {
            basis.push(v / nv);
        }
        if basis.len() == f - 1 {
            break;
        }
    }
    basis
}

/// Reduced `(2f-2)×(2f-2)` monodromy of `J = R_g⁻¹ DΦ_T` in the frame at `x₀`,
/// ordered (position block, momentum block).
pub fn reduced_monodromy(frame: &TransverseFrame, jacobian_mod_g: &DMatrix<f64>) -> DMatrix<f64> {
    let k = frame.position.len();
    let n = frame.flow.len();
    let mut basis = DMatrix::zeros(n, 2 * k + 1);
    basis.set_column(0, &frame.flow);
    for j in 0..k {
        basis.set_column(1 + j, &frame.position[j]);
        basis.set_column(1 + k + j, &frame.momentum[j]);
    }
    let svd = basis.clone().svd(true, true);
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    for j in 0..2 * k {
        let v = jacobian_mod_g * basis.column(1 + j);
        let coeff = svd.solve(&v, 1e-14).expect("frame basis has full rank");
        for i in 0..2 * k {
            out[(i, j)] = coeff[1 + i];
        }
    }
    out
}

/// `ν + n₋(W)` with `W = D B⁻¹ + B⁻¹ A - B⁻¹ - B⁻ᵀ` for `M = [[A, B], [C, D]]`.
pub fn maslov_index(conjugate_points: usize, monodromy: &DMatrix<f64>) -> i32 {
    let k = monodromy.nrows() / 2;
    let a = monodromy.view((0, 0), (k, k)).into_owned();
    let b = monodromy.view((0, k), (k, k)).into_owned();
    let d = monodromy.view((k, k), (k, k)).into_owned();
    let binv = match b.clone().try_inverse() {
        Some(x) => x,
        None => return conjugate_points as i32,
    };
    let w = &d * &binv + &binv * &a - &binv - binv.transpose();
    let sym = (&w + w.transpose()) * 0.5;
    let neg = SymmetricEigen::new(sym).eigenvalues.iter().filter(|&&x| x < 0.0).count();
    (conjugate_points + neg) as i32
}

/// `det(M - 1)`.
pub fn det_m_minus_one(monodromy: &DMatrix<f64>) -> f64 {
    let n = monodromy.nrows();
    (monodromy - DMatrix::identity(n, n)).determinant()
}

//! Spin precession `ḋ = -(i/2) S·C(q(t), p(t)) d`, `d(0) = 1`, with `S` in
//! units where ħ = 1.
//!
//! The spin equation is integrated together with the classical flow in one
//! augmented state `[q, p, S_action, Re d, Im d]`, so no interpolation of the
//! trajectory is involved.

use crate::dynamics::{hamilton_rhs, FoldedTrajectory, Flow, Model, OdeConfig, PhaseState, Solver};
use crate::error::{Error, Result};
use crate::grouprep::FiniteGroup;
use crate::linalg::{self, c, CMatrix};
use crate::spinalg::SpinContext;

const REUNITARIZE_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMode {
    Full,
    Folded,
}

#[derive(Debug, Clone)]
pub struct SpinTransportResult {
    pub d: CMatrix,
    pub mode: TransportMode,
    pub final_state: PhaseState,
}

/// Coupling vector `C(q, p)` of the model.
pub fn coupling_symbol(model: &dyn Model, q: &[f64], p: &[f64]) -> [f64; 3] {
    model.coupling(q, p)
}

fn pack(d: &CMatrix, out: &mut [f64]) {
    let n = d.len();
    for (k, z) in d.iter().enumerate() {
        out[k] = z.re;
        out[n + k] = z.im;
    }
}

fn unpack(y: &[f64], dim: usize) -> CMatrix {
    let n = dim * dim;
    CMatrix::from_iterator(dim, dim, (0..n).map(|k| c(y[k], y[n + k])))
}

/// Transport `d` along the full-space flow from `initial` for `duration`.
pub fn transport_full(
    model: &dyn Model,
    ctx: &SpinContext,
    initial: &PhaseState,
    duration: f64,
    config: OdeConfig,
) -> Result<SpinTransportResult> {
    let (d, final_state) = transport_segment(model, ctx, initial, duration, config)?;
    Ok(SpinTransportResult { d, mode: TransportMode::Full, final_state })
}

fn transport_segment(
    model: &dyn Model,
    ctx: &SpinContext,
    initial: &PhaseState,
    duration: f64,
    config: OdeConfig,
) -> Result<(CMatrix, PhaseState)> {
    let dim = ctx.dim();
    let f = model.dof();
    if duration <= 0.0 {
        return Ok((linalg::identity(dim), initial.clone()));
    }
    let base = 2 * f + 1;
    let (sx, sy, sz) = (ctx.sx().clone(), ctx.sy().clone(), ctx.sz().clone());
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        hamilton_rhs(model, &y[..base], &mut dy[..base]);
        let cvec = model.coupling(&y[..f], &y[f..2 * f]);
        let d = unpack(&y[base..], dim);
        // -(i/2) S·C d
        let gen = &sx * c(cvec[0], 0.0) + &sy * c(cvec[1], 0.0) + &sz * c(cvec[2], 0.0);
        let dd = gen * d * c(0.0, -0.5);
        pack(&dd, &mut dy[base..]);
    };
    let solver = Solver::new(rhs, config);
    let mut y0 = initial.to_flow_vector();
    y0.resize(base + 2 * dim * dim, 0.0);
    pack(&linalg::identity(dim), &mut y0[base..]);
    let mut count = 0usize;
    let (_, y) = solver.run(initial.t, &y0, initial.t + duration, |step| {
        count += 1;
        if count % REUNITARIZE_EVERY != 0 {
            return Ok(Flow::Continue);
        }
        let d = unpack(&step.y1[base..], dim);
        if linalg::unitarity_defect(&d) <= 1e-12 {
            return Ok(Flow::Continue);
        }
        let mut y = step.y1.to_vec();
        pack(&linalg::polar_unitary(&d), &mut y[base..]);
        Ok(Flow::Restart { t: step.t1, y })
    })?;
    let mut d = unpack(&y[base..], dim);
    if linalg::unitarity_defect(&d) > 1e-12 {
        d = linalg::polar_unitary(&d);
    }
    Ok((d, PhaseState::from_flow_vector(&y, f, initial.t + duration)))
}

/// `d_γ̄ = d_n U(h_n)† ··· U(h_1)† d_0` over the segments of a folded
/// trajectory; equals `U(g)† d_γ` for the unfolded path.
pub fn transport_folded(
    model: &dyn Model,
    group: &FiniteGroup,
    ctx: &SpinContext,
    folded: &FoldedTrajectory,
    config: OdeConfig,
) -> Result<SpinTransportResult> {
    if group.two_s != ctx.two_s() {
        return Err(Error::InvalidParameter(format!(
            "group lifts are at 2S = {}, transport requested at 2S = {}",
            group.two_s,
            ctx.two_s()
        )));
    }
    let mut d = linalg::identity(ctx.dim());
    for (j, seg) in folded.segments.iter().enumerate() {
        if j > 0 {
            let h = folded.crossings[j - 1].element;
            d = group.elements[h].spin_lift.adjoint() * d;
        }
        let (dj, _) = transport_segment(model, ctx, &seg.start, seg.end.t - seg.start.t, config)?;
        d = dj * d;
    }
    Ok(SpinTransportResult { d, mode: TransportMode::Folded, final_state: folded.final_state.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_folded, ModelSpec, PlanarC3};
    use crate::grouprep::{build_double_group, build_point_group, GroupSpec};
    use crate::linalg::distance;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn spec(lambda: f64, kappa: f64) -> ModelSpec {
        ModelSpec {
            family: "planar_c3".into(),
            mass: 1.0,
            lambda,
            epsilon: 0.0,
            mu: 0.0,
            quartic: 0.1,
            kappa,
            hbar_eff: 0.02,
            params: vec![],
        }
    }

    /// Free particle with a constant field along z.
    #[derive(Debug)]
    struct ConstantField(f64);

    impl Model for ConstantField {
        fn family(&self) -> &str {
            "constant_field"
        }
        fn dof(&self) -> usize {
            2
        }
        fn mass(&self) -> f64 {
            1.0
        }
        fn kappa(&self) -> f64 {
            1.0
        }
        fn hbar_eff(&self) -> f64 {
            1.0
        }
        fn potential(&self, _q: &[f64]) -> f64 {
            0.0
        }
        fn gradient(&self, _q: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn hessian(&self, _q: &[f64]) -> DMatrix<f64> {
            DMatrix::zeros(2, 2)
        }
        fn symmetry(&self) -> GroupSpec {
            GroupSpec::Cn { n: 1, axis: [0.0, 0.0, 1.0] }
        }
        fn coupling(&self, _q: &[f64], _p: &[f64]) -> [f64; 3] {
            [0.0, 0.0, self.0]
        }
    }

    #[test]
    fn coupling_examples() {
        let m = PlanarC3 { spec: ModelSpec { quartic: 0.0, ..spec(0.0, 1.0) } };
        assert_eq!(coupling_symbol(&m, &[0.4, 0.2], &[0.0, 0.0]), [0.0, 0.0, 0.0]);
        assert_eq!(coupling_symbol(&m, &[1.0, 0.0], &[0.0, 1.0]), [0.0, 0.0, 1.0]);
        // ∇V ∥ p
        let cz = coupling_symbol(&m, &[0.3, 0.4], &[0.6, 0.8])[2];
        assert!(cz.abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_gives_identity() {
        let m = PlanarC3 { spec: spec(1.0, 0.0) };
        let init = PhaseState::new(vec![0.3, 0.1], vec![0.2, 0.5], 0.0);
        let r = transport_full(&m, &SpinContext::new(1), &init, 5.0, OdeConfig::default()).unwrap();
        assert!(distance(&r.d, &linalg::identity(2)) < 1e-13);
    }

    #[test]
    fn constant_field_closed_form() {
        for two_s in 1..4 {
            let ctx = SpinContext::new(two_s);
            let cz = 0.7;
            let t = 3.3;
            let init = PhaseState::new(vec![0.0, 0.0], vec![0.1, 0.0], 0.0);
            let r = transport_full(&ConstantField(cz), &ctx, &init, t, OdeConfig::default()).unwrap();
            let expected = linalg::expm_hermitian(ctx.sz(), cz * t / 2.0);
            assert!(distance(&r.d, &expected) < 1e-10);
        }
    }

    /// Classical RK4 on the augmented system with a fixed small step.
    fn rk4_reference(model: &dyn Model, ctx: &SpinContext, init: &PhaseState, t: f64, steps: usize) -> CMatrix {
        let f = model.dof();
        let dim = ctx.dim();
        let deriv = |y: &(Vec<f64>, CMatrix)| -> (Vec<f64>, CMatrix) {
            let mut dy = vec![0.0; 2 * f + 1];
            hamilton_rhs(model, &y.0, &mut dy);
            let cv = model.coupling(&y.0[..f], &y.0[f..2 * f]);
            (dy, ctx.dot(cv) * &y.1 * c(0.0, -0.5))
        };
        let axpy = |y: &(Vec<f64>, CMatrix), k: &(Vec<f64>, CMatrix), h: f64| {
            (y.0.iter().zip(&k.0).map(|(a, b)| a + h * b).collect::<Vec<_>>(), &y.1 + &k.1 * c(h, 0.0))
        };
        let mut y = (init.to_flow_vector(), linalg::identity(dim));
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = deriv(&y);
            let k2 = deriv(&axpy(&y, &k1, h / 2.0));
            let k3 = deriv(&axpy(&y, &k2, h / 2.0));
            let k4 = deriv(&axpy(&y, &k3, h));
            let sum0: Vec<f64> = (0..y.0.len()).map(|i| k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]).collect();
            let sum1 = &k1.1 + &k2.1 * c(2.0, 0.0) + &k3.1 * c(2.0, 0.0) + &k4.1;
            y = axpy(&y, &(sum0, sum1), h / 6.0);
        }
        y.1
    }

    #[test]
    fn matches_fine_step_reference() {
        let m = PlanarC3 { spec: spec(1.0, 0.3) };
        let ctx = SpinContext::new(1);
        let init = PhaseState::new(vec![0.4, -0.2], vec![0.3, 0.6], 0.0);
        let r = transport_full(&m, &ctx, &init, 6.0, OdeConfig::default()).unwrap();
        let reference = rk4_reference(&m, &ctx, &init, 6.0, 60_000);
        assert!(distance(&r.d, &reference) < 1e-7);
        assert!(linalg::unitarity_defect(&r.d) < 1e-8);
    }

    #[test]
    fn composition_over_split_interval() {
        let m = PlanarC3 { spec: spec(1.0, 0.5) };
        let ctx = SpinContext::new(1);
        let init = PhaseState::new(vec![0.4, -0.2], vec![0.3, 0.6], 0.0);
        let whole = transport_full(&m, &ctx, &init, 7.0, OdeConfig::default()).unwrap();
        let first = transport_full(&m, &ctx, &init, 3.0, OdeConfig::default()).unwrap();
        let second = transport_full(&m, &ctx, &first.final_state, 4.0, OdeConfig::default()).unwrap();
        assert!(distance(&whole.d, &(&second.d * &first.d)) < 1e-8);
    }

    #[test]
    fn folded_equals_lift_adjoint_times_unfolded() {
        let m = PlanarC3 { spec: spec(1.0, 0.4) };
        let gamma = build_point_group(&GroupSpec::Cn { n: 3, axis: [0.0, 0.0, 1.0] }).unwrap();
        for two_s in [1u32, 2] {
            let g = build_double_group(&gamma, two_s).unwrap();
            let ctx = SpinContext::new(two_s);
            let init = PhaseState::new(vec![0.5 * (0.4f64).cos(), 0.5 * (0.4f64).sin()], vec![-0.5, 0.7], 0.0);
            let folded = integrate_folded(&m, &g, &init, 15.0, OdeConfig::default(), &[]).unwrap();
            assert!(folded.crossings.len() >= 2);
            let dbar = transport_folded(&m, &g, &ctx, &folded, OdeConfig::default()).unwrap();
            let d = transport_full(&m, &ctx, &init, 15.0, OdeConfig::default()).unwrap();
            let expected = g.elements[folded.accumulated_g].spin_lift.adjoint() * &d.d;
            assert!(distance(&dbar.d, &expected) < 1e-7);
            // planar factors all commute: d is diagonal in the S_z basis
            for i in 0..ctx.dim() {
                for j in 0..ctx.dim() {
                    if i != j {
                        assert!(dbar.d[(i, j)].norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_coupling_single_crossing_is_lift_adjoint() {
        let m = PlanarC3 { spec: ModelSpec { lambda: 0.0, quartic: 0.0, ..spec(0.0, 0.0) } };
        let gamma = build_point_group(&GroupSpec::Cn { n: 3, axis: [0.0, 0.0, 1.0] }).unwrap();
        let g = build_double_group(&gamma, 1).unwrap();
        let a = 2.0 * PI / 3.0 - 0.2;
        let init = PhaseState::new(vec![a.cos(), a.sin()], vec![-a.sin(), a.cos()], 0.0);
        let folded = integrate_folded(&m, &g, &init, 0.5, OdeConfig::default(), &[]).unwrap();
        assert_eq!(folded.crossings.len(), 1);
        let d = transport_folded(&m, &g, &SpinContext::new(1), &folded, OdeConfig::default()).unwrap();
        let h = folded.crossings[0].element;
        assert!(distance(&d.d, &g.elements[h].spin_lift.adjoint()) < 1e-12);
    }
}

use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use symtrace::dynamics::{ModelRegistry, ModelSpec, OdeConfig, PhaseState};
use symtrace::linalg;
use symtrace::spinalg::SpinContext;
use symtrace::spintransport::transport_full;

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn spec(family: &str, kappa: f64) -> ModelSpec {
    ModelSpec {
        family: family.into(),
        mass: 1.0,
        lambda: 1.0,
        epsilon: 0.0,
        mu: 0.3,
        quartic: 0.1,
        kappa,
        hbar_eff: 0.05,
        params: vec![],
    }
}

fn start(f: usize, q: &[f64], p: &[f64]) -> PhaseState {
    PhaseState::new(q[..f].to_vec(), p[..f].to_vec(), 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn rotations_form_a_projective_representation(
        two_s in 0u32..5,
        (t1, p1) in (0.0..PI, 0.0..2.0 * PI),
        a in -4.0..4.0f64,
        b in -4.0..4.0f64,
        v in prop::array::uniform3(-1.0..1.0f64),
    ) {
        let ctx = SpinContext::new(two_s);
        let n = unit(t1, p1);
        let ua = ctx.spin_rotation(n, a).unwrap();
        let ub = ctx.spin_rotation(n, b).unwrap();
        let uab = ctx.spin_rotation(n, a + b).unwrap();
        prop_assert!(linalg::unitarity_defect(&ua) < 1e-12);
        prop_assert!(linalg::distance(&(&ua * &ub), &uab) < 1e-11);
        // U (S·v) U† = S·(R v)
        let rv = linalg::rotation_matrix(n, a) * nalgebra::Vector3::from(v);
        let lhs = &ua * ctx.dot(v) * ua.adjoint();
        prop_assert!(linalg::distance(&lhs, &ctx.dot([rv[0], rv[1], rv[2]])) < 1e-11);
        let sign = if two_s % 2 == 0 { 1.0 } else { -1.0 };
        let full = ctx.spin_rotation(n, 2.0 * PI).unwrap();
        prop_assert!(linalg::distance(&full, &(linalg::identity(ctx.dim()) * Complex64::new(sign, 0.0))) < 1e-12);
    }

    #[test]
    fn time_reversal_inverts_spin(two_s in 0u32..5, v in prop::array::uniform3(-1.0..1.0f64)) {
        let ctx = SpinContext::new(two_s);
        let y = ctx.time_reversal_matrix();
        // T = Y K: T (S·v) T⁻¹ = Y conj(S·v) Y†
        let flipped = &y * linalg::conj(&ctx.dot(v)) * y.adjoint();
        prop_assert!(linalg::distance(&flipped, &(ctx.dot(v) * Complex64::new(-1.0, 0.0))) < 1e-12);
        let square = &y * linalg::conj(&y);
        let sign = ctx.time_reversal_square_sign() as f64;
        prop_assert!(linalg::distance(&square, &(linalg::identity(ctx.dim()) * Complex64::new(sign, 0.0))) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn transport_is_special_unitary_and_composes(
        three_d in any::<bool>(),
        two_s in 1u32..4,
        kappa in 0.05..0.6f64,
        q in prop::array::uniform3(-0.35..0.35f64),
        p in prop::array::uniform3(-0.5..0.5f64),
        t1 in 0.5..6.0f64,
        t2 in 0.5..6.0f64,
    ) {
        let family = if three_d { "threed_c3" } else { "planar_c3" };
        let model = ModelRegistry::with_builtins().build(&spec(family, kappa)).unwrap();
        let ctx = SpinContext::new(two_s);
        let init = start(model.dof(), &q, &p);
        let cfg = OdeConfig::default();
        let whole = transport_full(model.as_ref(), &ctx, &init, t1 + t2, cfg).unwrap();
        let first = transport_full(model.as_ref(), &ctx, &init, t1, cfg).unwrap();
        let second = transport_full(model.as_ref(), &ctx, &first.final_state, t2, cfg).unwrap();
        prop_assert!(linalg::unitarity_defect(&whole.d) < 1e-8);
        prop_assert!((whole.d.determinant() - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        prop_assert!(linalg::distance(&whole.d, &(&second.d * &first.d)) < 1e-7);
    }

    #[test]
    fn zero_coupling_leaves_spin_untouched(
        q in prop::array::uniform3(-0.35..0.35f64),
        p in prop::array::uniform3(-0.5..0.5f64),
        t in 0.5..10.0f64,
    ) {
        let model = ModelRegistry::with_builtins().build(&spec("threed_c3", 0.0)).unwrap();
        let ctx = SpinContext::new(1);
        let r = transport_full(model.as_ref(), &ctx, &start(3, &q, &p), t, OdeConfig::default()).unwrap();
        prop_assert!(linalg::distance(&r.d, &linalg::identity(2)) < 1e-12);
    }
}

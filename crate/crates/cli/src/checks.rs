//! Structural self-checks shared by the `spin` and `selftest` commands.

use crate::commands::Context;
use crate::error::{CliError, CliResult};
use serde::Serialize;
use symtrace::grouprep::{
    frobenius_schur_restricted, frobenius_schur_value, full_projector, spinor_regular_representation, FiniteGroup, Irrep,
};
use symtrace::linalg;
use symtrace::orbits::PeriodicOrbit;
use symtrace::spinalg::{classify_antiunitary_spin_part, AntiunitaryClass, SpinContext};
use symtrace::traceformula::{assign_group_element, Convention};
use symtrace::Complex64;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured defect or count.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `value ≤ tolerance`; NaN fails.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance }
    }
}

/// Tolerance error naming every failed check.
pub fn require(checks: &[Check]) -> CliResult<()> {
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.passed).map(|c| format!("{} = {:.3e} > {:.1e}", c.name, c.value, c.tolerance)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failed.join("; ")))
    }
}

/// 2π rotations, time-reversal signs and the antiunitary classifier.
pub fn spin_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for two_s in 0..=3u32 {
        let ctx = SpinContext::new(two_s);
        let sign = if two_s % 2 == 0 { 1.0 } else { -1.0 };
        let mut worst: f64 = 0.0;
        for n in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.48, -0.6, 0.64]] {
            let u = ctx.spin_rotation(n, 2.0 * std::f64::consts::PI).expect("unit axis");
            worst = worst.max(linalg::distance(&u, &(linalg::identity(ctx.dim()) * Complex64::new(sign, 0.0))));
        }
        out.push(Check::below(format!("two_pi_rotation[2S={two_s}]"), worst, 1e-12));
        let t_sign = ctx.time_reversal_square_sign() as f64;
        out.push(Check::below(format!("time_reversal_square[2S={two_s}]"), (t_sign - sign).abs(), 0.0));
    }
    // a0 = cos β, a = sin β n̂: the y axis is conventional, the xz plane removes the rotation
    let mut misclassified = 0.0;
    for k in 0..24 {
        let phi = k as f64 * std::f64::consts::PI / 12.0;
        let checks = [
            ((0.0, [0.0, 1.0, 0.0]), AntiunitaryClass::ConventionalEquivalent),
            ((0.0, [0.0, -1.0, 0.0]), AntiunitaryClass::ConventionalEquivalent),
            ((phi.cos(), [phi.sin(), 0.0, 0.0]), AntiunitaryClass::RotationRemoved),
            ((phi.cos(), [0.0, 0.0, phi.sin()]), AntiunitaryClass::RotationRemoved),
        ];
        for ((a0, a), expected) in checks {
            if classify_antiunitary_spin_part(a0, a).ok() != Some(expected) {
                misclassified += 1.0;
            }
        }
        let s = 0.5f64.sqrt();
        let tilted = classify_antiunitary_spin_part(0.5, [0.5, s * phi.cos(), s * phi.sin()]);
        if phi.cos().abs() > 1e-6 && tilted.ok() != Some(AntiunitaryClass::Invalid) {
            misclassified += 1.0;
        }
    }
    out.push(Check::below("antiunitary_classifier_misclassified", misclassified, 0.0));
    out
}

/// Orthogonality, dimension sum, indicator agreement and vanishing
/// standard-irrep projectors.
pub fn group_checks(group: &FiniteGroup, irreps: &[Irrep]) -> Vec<Check> {
    let n = group.order() as f64;
    let mut orth: f64 = 0.0;
    for a in irreps {
        for b in irreps {
            let ip: Complex64 = a.characters.iter().zip(&b.characters).map(|(x, y)| x.conj() * y).sum::<Complex64>() / n;
            let expected = if a.label == b.label { 1.0 } else { 0.0 };
            orth = orth.max((ip - expected).norm());
        }
    }
    let dims: f64 = irreps.iter().map(|i| (i.dimension * i.dimension) as f64).sum();
    let fs = irreps
        .iter()
        .map(|i| (frobenius_schur_value(i, group) - frobenius_schur_restricted(i, group)).norm())
        .fold(0.0, f64::max);
    let mut out = vec![
        Check::below("character_orthogonality", orth, 1e-10),
        Check::below("dimension_sum_defect", (dims - n).abs(), 0.0),
        Check::below("restricted_indicator_defect", fs, 1e-12),
    ];
    if group.is_double {
        let rep = spinor_regular_representation(group);
        let standard = irreps
            .iter()
            .filter(|i| !i.is_extra())
            .map(|i| linalg::max_abs(&full_projector(i, group, &rep)))
            .fold(0.0, f64::max);
        out.push(Check::below("standard_projector_norm", standard, 1e-10));
    }
    out
}

/// `χ(g_p) tr(d_p)` in the geometric and double conventions. Only extra
/// irreps of a double group are spin-compatible; a standard character is
/// even under `g → ēg` while `tr d` is odd.
pub fn convention_check(group: &FiniteGroup, irreps: &[Irrep], orbits: &[PeriodicOrbit]) -> Check {
    let mut worst: f64 = 0.0;
    for o in orbits {
        let (gd, dd) = assign_group_element(group, o, Convention::Double);
        let (gg, dg) = assign_group_element(group, o, Convention::Geometric);
        for irrep in irreps.iter().filter(|i| !group.is_double || i.is_extra()) {
            let a = irrep.character(gd) * linalg::trace(&dd);
            let b = irrep.character(gg) * linalg::trace(&dg);
            worst = worst.max((a - b).norm());
        }
    }
    Check::below("convention_equivalence", worst, 1e-10)
}

/// Group, spin and convention checks for the scenario's group and orbits.
pub fn selftest(ctx: &Context) -> CliResult<Vec<Check>> {
    let mut out = group_checks(&ctx.group, &ctx.irreps);
    out.extend(spin_checks());
    let orbits = ctx.orbits()?;
    out.push(convention_check(&ctx.group, &ctx.irreps, &orbits));
    Ok(out)
}

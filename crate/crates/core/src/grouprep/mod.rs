//! Finite point groups, double groups and their irreducible representations.
//!
//! Elements of a [`FiniteGroup`] are addressed by index. For double groups the
//! first |Γ| indices hold Γ (sign +1) in canonical order and the remaining
//! ones hold ēΓ in the same order.

mod group;
mod irreps;

pub use group::{
    build_double_group, build_point_group, reflection, su2_lift, DoubleGroupElement, FiniteGroup,
    GeometricElement, GroupSpec, MAX_GROUP_ORDER,
};
pub use irreps::{character_table, homomorphism_defect, Intertwiner, Irrep};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Frobenius-Schur indicator `(1/|G|) Σ χ(g²)`, rounded to {0, ±1}.
pub fn frobenius_schur(irrep: &Irrep, group: &FiniteGroup) -> i32 {
    let v = frobenius_schur_value(irrep, group);
    v.re.round() as i32
}

/// Unrounded indicator over the full group.
pub fn frobenius_schur_value(irrep: &Irrep, group: &FiniteGroup) -> Complex64 {
    let n = group.order();
    let sum: Complex64 = (0..n).map(|g| irrep.characters[group.mul(g, g)]).sum();
    sum / n as f64
}

/// Indicator summed over Γ only; `(ēg)² = g²` makes it equal to the full form.
pub fn frobenius_schur_restricted(irrep: &Irrep, group: &FiniteGroup) -> Complex64 {
    let sum: Complex64 = group
        .geometric_subset
        .iter()
        .map(|&g| irrep.characters[group.mul(g, g)])
        .sum();
    sum / group.geometric_order() as f64
}

/// `κ = χ(ē)/s`: +1 for standard, -1 for extra irreps.
pub fn classify_standard_extra(irrep: &Irrep, group: &FiniteGroup) -> Result<i32> {
    let ebar = group
        .ebar()
        .ok_or_else(|| Error::InvalidParameter("standard/extra split needs a double group".into()))?;
    let kappa = irrep.characters[ebar] / irrep.dimension as f64;
    if (kappa.re.abs() - 1.0).abs() > 1e-12 || kappa.im.abs() > 1e-12 {
        return Err(Error::CorruptedIrrep { irrep: irrep.label.clone(), kappa: kappa.re });
    }
    Ok(kappa.re.signum() as i32)
}

/// Weights `w_g = (s/|Γ|) χ(g)` for `g ∈ Γ`, in the order of
/// `group.geometric_subset`. The projector is `Σ w_g U(g)†`.
pub fn projector_coefficients(irrep: &Irrep, group: &FiniteGroup) -> Result<Vec<(usize, Complex64)>> {
    if group.is_double && classify_standard_extra(irrep, group)? == 1 {
        return Err(Error::VanishingProjector { irrep: irrep.label.clone() });
    }
    let norm = irrep.dimension as f64 / group.geometric_order() as f64;
    Ok(group
        .geometric_subset
        .iter()
        .map(|&g| (g, irrep.characters[g] * norm))
        .collect())
}

/// `Σ w_g U(g)†` for a representation `rep` indexed like the group.
pub fn assemble_projector(weights: &[(usize, Complex64)], rep: &[CMatrix]) -> CMatrix {
    let d = rep[0].nrows();
    let mut p = CMatrix::zeros(d, d);
    for &(g, w) in weights {
        p += rep[g].adjoint() * w;
    }
    p
}

/// Projector summed over the whole group, `(s/|G|) Σ_{g∈G} χ(g) U(g)†`.
/// In a representation with `U(ē) = -1` it vanishes for standard irreps.
pub fn full_projector(irrep: &Irrep, group: &FiniteGroup, rep: &[CMatrix]) -> CMatrix {
    let d = rep[0].nrows();
    let norm = irrep.dimension as f64 / group.order() as f64;
    let mut p = CMatrix::zeros(d, d);
    for (g, u) in rep.iter().enumerate() {
        p += u.adjoint() * (irrep.characters[g] * norm);
    }
    p
}

/// Left-regular representation restricted to the subspace where `ē` acts as
/// `-1`; equal to the left-regular representation for non-double groups.
pub fn spinor_regular_representation(group: &FiniteGroup) -> Vec<CMatrix> {
    let n = group.order();
    let left: Vec<CMatrix> = (0..n)
        .map(|g| {
            let mut m = CMatrix::zeros(n, n);
            for h in 0..n {
                m[(group.mul(g, h), h)] = c(1.0, 0.0);
            }
            m
        })
        .collect();
    match group.ebar() {
        None => left,
        Some(ebar) => {
            let half = (linalg::identity(n) - &left[ebar]) * c(0.5, 0.0);
            left.iter().map(|l| l * &half).collect()
        }
    }
}

const INTERTWINER_ATTEMPTS: usize = 6;

/// Unitary `Z` with `ρ*(g) = Z ρ(g) Z⁻¹` and the sign of `Z Z*`, or `None`
/// for complex irreps.
pub fn find_intertwiner(irrep: &Irrep, seed: u64) -> Option<Intertwiner> {
    if irrep.fs_indicator == 0 {
        return None;
    }
    let s = irrep.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..INTERTWINER_ATTEMPTS {
        let w = CMatrix::from_fn(s, s, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut avg = CMatrix::zeros(s, s);
        for r in &irrep.matrices {
            avg += linalg::conj(r) * &w * r.adjoint();
        }
        avg /= c(irrep.matrices.len() as f64, 0.0);
        if linalg::min_singular_value(&avg) < 1e-6 {
            continue;
        }
        let z = linalg::polar_unitary(&avg);
        let residual = irrep
            .matrices
            .iter()
            .map(|r| linalg::distance(&linalg::conj(r), &(&z * r * z.adjoint())))
            .fold(0.0, f64::max);
        if residual > 1e-8 {
            continue;
        }
        let zz = &z * linalg::conj(&z);
        let sign = if zz[(0, 0)].re > 0.0 { 1 } else { -1 };
        return Some(Intertwiner { z, sign });
    }
    None
}

/// Character table plus indicators, κ and intertwiners for every irrep.
pub fn analyse(group: &FiniteGroup, seed: u64) -> Result<Vec<Irrep>> {
    let mut irreps = character_table(group, seed)?;
    for (k, irrep) in irreps.iter_mut().enumerate() {
        irrep.intertwiner = find_intertwiner(irrep, seed.wrapping_add(k as u64 + 1));
    }
    Ok(irreps)
}

/// CSV with one row per (irrep, conjugacy class).
pub fn write_character_table_csv<W: Write>(group: &FiniteGroup, irreps: &[Irrep], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["irrep", "class_representative", "re_chi", "im_chi", "fs", "kappa"])
        .map_err(csv_err)?;
    let classes = group.conjugacy_classes();
    for irrep in irreps {
        let kappa = irrep.kappa.map(|k| k.to_string()).unwrap_or_default();
        for class in &classes {
            let chi = irrep.characters[class[0]];
            w.write_record([
                irrep.label.clone(),
                group.label(class[0]).to_string(),
                format!("{:.12}", chi.re),
                format!("{:.12}", chi.im),
                irrep.fs_indicator.to_string(),
                kappa.clone(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

//! Pseudo-orbit expansions of per-irrep spectral determinants.
//!
//! With `z_A(E) = F_A (-1)^{n_A} e^{iS_A(E)/ħ}`:
//!
//! * `plus`: `Δ(E + iη) = e^{-iπN̄(E+iη)} Σ_A z_A(E + iη)`
//! * `minus`: `Δ(E - iη)`, the complex conjugate of `plus`
//! * `inv_plus`, `inv_minus`: `1/Δ`, expanded without `(-1)^{n_A}` and with
//!   `e^{+iπN̄}`
//! * `riemann_siegel`: `e^{-iπN̄(E)} Σ_{T_A < T_H/2} z_A(E) + c.c.`, with
//!   `T_H = 2πħ ρ̄_α(E)`
//!
//! Overall normalisations are dropped.

mod pseudo;

pub use pseudo::{enumerate_pseudo_orbits, orbit_factors, OrbitFactor, PseudoOrbit, DEFAULT_CAP};

use crate::error::{Error, Result};
use crate::traceformula::csv_err;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

pub const DEFAULT_ETA: f64 = 1e-6;

/// Smooth counting function `N̄_α` and density `ρ̄_α = dN̄_α/dE`.
pub trait MeanCounting: Send + Sync {
    fn counting(&self, e: f64) -> f64;
    fn density(&self, e: f64) -> f64;
}

impl<F, G> MeanCounting for (F, G)
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
{
    fn counting(&self, e: f64) -> f64 {
        (self.0)(e)
    }
    fn density(&self, e: f64) -> f64 {
        (self.1)(e)
    }
}

/// Everything a variant needs to evaluate a determinant at real `E`.
pub struct SeriesContext<'a> {
    pub pseudo_orbits: &'a [PseudoOrbit],
    pub mean: &'a dyn MeanCounting,
    pub hbar: f64,
    pub eta: f64,
}

impl SeriesContext<'_> {
    /// `Σ_A F_A s_A e^{iS_A(E)/ħ} e^{-T_A η'/ħ}` over `T_A < cutoff`, with
    /// `s_A = (-1)^{n_A}` if `signed`.
    fn sum(&self, e: f64, eta: f64, signed: bool, cutoff: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in self.pseudo_orbits {
            if a.period >= cutoff {
                continue;
            }
            let sign = if signed { a.sign() } else { 1.0 };
            let phase = Complex64::from_polar((-a.period * eta / self.hbar).exp(), a.action_at(e) / self.hbar);
            acc += a.weight * phase * sign;
        }
        acc
    }

    /// `e^{∓iπN̄(E + iη)}` to first order in `η`.
    fn mean_phase(&self, e: f64, eta: f64, sign: f64) -> Complex64 {
        let n = self.mean.counting(e);
        let rho = self.mean.density(e);
        Complex64::from_polar((sign * PI * eta * rho).exp(), -sign * PI * n)
    }

    /// `Δ(E + iη)`.
    pub fn plus(&self, e: f64) -> Complex64 {
        self.mean_phase(e, self.eta, 1.0) * self.sum(e, self.eta, true, f64::INFINITY)
    }

    /// `1/Δ(E + iη)`.
    pub fn inv_plus(&self, e: f64) -> Complex64 {
        self.mean_phase(e, self.eta, -1.0) * self.sum(e, self.eta, false, f64::INFINITY)
    }

    /// `T_H/2` at `E`.
    pub fn half_heisenberg_time(&self, e: f64) -> f64 {
        PI * self.hbar * self.mean.density(e)
    }

    /// Real Riemann-Siegel determinant.
    pub fn riemann_siegel(&self, e: f64) -> f64 {
        let z = self.mean_phase(e, 0.0, 1.0) * self.sum(e, 0.0, true, self.half_heisenberg_time(e));
        let total = z + z.conj();
        debug_assert!(total.im.abs() < 1e-12 * (1.0 + total.re.abs()));
        total.re
    }
}

pub trait DeterminantVariant: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn evaluate(&self, ctx: &SeriesContext, e: f64) -> Complex64;
    /// Whether values are real by construction.
    fn is_real(&self) -> bool {
        false
    }
}

#[derive(Debug)]
pub struct Plus;
#[derive(Debug)]
pub struct Minus;
#[derive(Debug)]
pub struct InvPlus;
#[derive(Debug)]
pub struct InvMinus;
#[derive(Debug)]
pub struct RiemannSiegel;

impl DeterminantVariant for Plus {
    fn name(&self) -> &str {
        "plus"
    }
    fn evaluate(&self, ctx: &SeriesContext, e: f64) -> Complex64 {
        ctx.plus(e)
    }
}

impl DeterminantVariant for Minus {
    fn name(&self) -> &str {
        "minus"
    }
    fn evaluate(&self, ctx: &SeriesContext, e: f64) -> Complex64 {
        ctx.plus(e).conj()
    }
}

impl DeterminantVariant for InvPlus {
    fn name(&self) -> &str {
        "inv_plus"
    }
    fn evaluate(&self, ctx: &SeriesContext, e: f64) -> Complex64 {
        ctx.inv_plus(e)
    }
}

impl DeterminantVariant for InvMinus {
    fn name(&self) -> &str {
        "inv_minus"
    }
    fn evaluate(&self, ctx: &SeriesContext, e: f64) -> Complex64 {
        ctx.inv_plus(e).conj()
    }
}

impl DeterminantVariant for RiemannSiegel {
    fn name(&self) -> &str {
        "riemann_siegel"
    }
    fn evaluate(&self, ctx: &SeriesContext, e: f64) -> Complex64 {
        Complex64::new(ctx.riemann_siegel(e), 0.0)
    }
    fn is_real(&self) -> bool {
        true
    }
}

/// Determinant variants selectable by name.
#[derive(Clone)]
pub struct VariantRegistry {
    variants: BTreeMap<String, Arc<dyn DeterminantVariant>>,
}

impl Default for VariantRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl VariantRegistry {
    pub fn empty() -> Self {
        Self { variants: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Plus));
        r.register(Arc::new(Minus));
        r.register(Arc::new(InvPlus));
        r.register(Arc::new(InvMinus));
        r.register(Arc::new(RiemannSiegel));
        r
    }

    pub fn register(&mut self, variant: Arc<dyn DeterminantVariant>) {
        self.variants.insert(variant.name().to_string(), variant);
    }

    pub fn names(&self) -> Vec<&str> {
        self.variants.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DeterminantVariant>> {
        self.variants
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy { kind: "determinant variant", name: name.to_string() })
    }
}

/// Determinant values on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantSeries {
    pub irrep_label: String,
    pub variant: String,
    /// Largest pseudo-orbit period admitted.
    pub cutoff_period: f64,
    pub hbar_eff: f64,
    pub eta: f64,
    pub energies: Vec<f64>,
    pub values: Vec<Complex64>,
}

pub fn determinant_series(
    ctx: &SeriesContext,
    variant: &dyn DeterminantVariant,
    irrep_label: &str,
    energies: &[f64],
) -> DeterminantSeries {
    let values = energies.par_iter().map(|&e| variant.evaluate(ctx, e)).collect();
    let cutoff_period = if variant.is_real() {
        energies.iter().map(|&e| ctx.half_heisenberg_time(e)).fold(0.0, f64::max)
    } else {
        ctx.pseudo_orbits.iter().map(|a| a.period).fold(0.0, f64::max)
    };
    DeterminantSeries {
        irrep_label: irrep_label.to_string(),
        variant: variant.name().to_string(),
        cutoff_period,
        hbar_eff: ctx.hbar,
        eta: ctx.eta,
        energies: energies.to_vec(),
        values,
    }
}

impl DeterminantSeries {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["E", "re", "im", "variant", "irrep"]).map_err(csv_err)?;
        for (e, v) in self.energies.iter().zip(&self.values) {
            w.write_record([
                format!("{e:.15e}"),
                format!("{:.15e}", v.re),
                format!("{:.15e}", v.im),
                self.variant.clone(),
                self.irrep_label.clone(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Zero {
    pub energy: f64,
    pub bracket_width: f64,
}

/// Sign changes of a real function on `grid`, refined by bisection. A
/// bracket whose end values do not shrink towards zero is a jump (for
/// instance where a pseudo-orbit enters the Riemann-Siegel sum) and is
/// discarded.
pub fn find_zeros<F: Fn(f64) -> f64 + Sync>(f: F, grid: &[f64], tol: f64) -> Vec<Zero> {
    let values: Vec<f64> = grid.par_iter().map(|&e| f(e)).collect();
    let brackets: Vec<(f64, f64, f64, f64)> = (1..grid.len())
        .filter(|&k| values[k - 1] == 0.0 || values[k - 1].signum() != values[k].signum())
        .map(|k| (grid[k - 1], grid[k], values[k - 1], values[k]))
        .collect();
    brackets
        .par_iter()
        .filter_map(|&(mut a, mut b, mut fa, fb0)| {
            let scale = fa.abs().max(fb0.abs());
            if fa == 0.0 {
                return Some(Zero { energy: a, bracket_width: 0.0 });
            }
            let mut fb = fb0;
            while b - a > tol {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 {
                    return Some(Zero { energy: m, bracket_width: 0.0 });
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
            }
            // continuous crossings have end values of order |f'|·tol
            if fa.abs().max(fb.abs()) > 1e-3 * scale {
                return None;
            }
            Some(Zero { energy: 0.5 * (a + b), bracket_width: b - a })
        })
        .collect()
}

pub fn write_zeros_csv<W: Write>(zeros: &[Zero], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["E_zero", "bracket_width"]).map_err(csv_err)?;
    for z in zeros {
        w.write_record([format!("{:.15e}", z.energy), format!("{:.3e}", z.bracket_width)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_mean() -> (impl Fn(f64) -> f64 + Send + Sync, impl Fn(f64) -> f64 + Send + Sync) {
        (|e: f64| 3.0 * e * e, |e: f64| 6.0 * e)
    }

    fn factors() -> Vec<OrbitFactor> {
        vec![
            OrbitFactor { label: "a".into(), period: 1.1, action: 1.2, energy: 1.0, weight: Complex64::new(0.2, 0.4) },
            OrbitFactor { label: "b".into(), period: 1.7, action: 1.9, energy: 1.0, weight: Complex64::new(-0.5, 0.1) },
            OrbitFactor { label: "c".into(), period: 2.9, action: 3.3, energy: 1.0, weight: Complex64::new(0.0, -0.3) },
        ]
    }

    #[test]
    fn no_orbits_gives_mean_phase_and_cosine() {
        let mean = linear_mean();
        let empty = vec![PseudoOrbit::empty()];
        let ctx = SeriesContext { pseudo_orbits: &empty, mean: &mean, hbar: 0.05, eta: 0.0 };
        for &e in &[0.3, 0.71, 1.4] {
            let n = 3.0 * e * e;
            assert!((ctx.plus(e) - Complex64::from_polar(1.0, -PI * n)).norm() < 1e-12);
            assert!((ctx.riemann_siegel(e) - 2.0 * (PI * n).cos()).abs() < 1e-12);
        }
        // zeros where N̄ = k + ½
        let grid: Vec<f64> = (1..400).map(|k| k as f64 * 0.005).collect();
        let zeros = find_zeros(|e| ctx.riemann_siegel(e), &grid, 1e-13);
        assert!(!zeros.is_empty());
        for z in zeros {
            let n = 3.0 * z.energy * z.energy;
            assert!(((n - 0.5) - (n - 0.5).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn minus_is_conjugate_of_plus() {
        let mean = linear_mean();
        let pseudo = enumerate_pseudo_orbits(&factors(), 6.0, DEFAULT_CAP).unwrap();
        let ctx = SeriesContext { pseudo_orbits: &pseudo, mean: &mean, hbar: 0.05, eta: DEFAULT_ETA };
        let reg = VariantRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["inv_minus", "inv_plus", "minus", "plus", "riemann_siegel"]);
        for &e in &[0.9, 1.05, 1.3] {
            let p = reg.get("plus").unwrap().evaluate(&ctx, e);
            let m = reg.get("minus").unwrap().evaluate(&ctx, e);
            assert!((p.conj() - m).norm() < 1e-10);
            assert!((p.norm() - m.norm()).abs() < 1e-10);
            let ip = reg.get("inv_plus").unwrap().evaluate(&ctx, e);
            let im = reg.get("inv_minus").unwrap().evaluate(&ctx, e);
            assert!((ip.conj() - im).norm() < 1e-10);
        }
    }

    #[test]
    fn riemann_siegel_is_real_and_order_independent() {
        let mean = linear_mean();
        let mut f = factors();
        let pseudo = enumerate_pseudo_orbits(&f, 8.0, DEFAULT_CAP).unwrap();
        let ctx = SeriesContext { pseudo_orbits: &pseudo, mean: &mean, hbar: 0.05, eta: 0.0 };
        f.reverse();
        f.sort_by(|a, b| a.period.total_cmp(&b.period));
        f.swap(0, 1);
        let shuffled = enumerate_pseudo_orbits(&f, 8.0, DEFAULT_CAP).unwrap();
        let ctx2 = SeriesContext { pseudo_orbits: &shuffled, mean: &mean, hbar: 0.05, eta: 0.0 };
        for k in 0..50 {
            let e = 0.8 + 0.013 * k as f64;
            let z = ctx.mean_phase(e, 0.0, 1.0) * ctx.sum(e, 0.0, true, ctx.half_heisenberg_time(e));
            assert!((z + z.conj()).im.abs() < 1e-12);
            assert!((ctx.riemann_siegel(e) - ctx2.riemann_siegel(e)).abs() < 1e-10);
        }
    }

    #[test]
    fn plus_and_inverse_multiply_to_one_to_leading_order() {
        // exp(-x)·exp(x) = 1 is exact only for the untruncated series; with a
        // long cutoff and small weights the product is close to one.
        let mean = linear_mean();
        let small: Vec<OrbitFactor> = factors()
            .into_iter()
            .map(|mut f| {
                f.weight *= 0.05;
                f
            })
            .collect();
        let pseudo = enumerate_pseudo_orbits(&small, 20.0, DEFAULT_CAP).unwrap();
        let ctx = SeriesContext { pseudo_orbits: &pseudo, mean: &mean, hbar: 0.05, eta: 0.0 };
        let e = 1.1;
        assert!((ctx.plus(e) * ctx.inv_plus(e) - 1.0).norm() < 1e-6);
    }

    #[test]
    fn csv_exports() {
        let mean = linear_mean();
        let empty = vec![PseudoOrbit::empty()];
        let ctx = SeriesContext { pseudo_orbits: &empty, mean: &mean, hbar: 0.05, eta: 0.0 };
        let s = determinant_series(&ctx, &RiemannSiegel, "1", &[0.5, 0.6]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("E,re,im,variant,irrep\n"));
        assert_eq!(text.lines().count(), 3);
    }
}

//! Per-irrep level densities: Weyl terms and Gaussian-smoothed orbit sums
//!
//! `ρ_α(E) = ρ̄_α(E) + (1/πħ) Re Σ_p χ_α(g_p) tr(d_p) A_p e^{iS_p(E)/ħ} e^{-σ²T_p²/2ħ²}`
//!
//! with `ρ̄_α = s_α (2S+1) |Ω(E)| / (|Γ| (2πħ)^f)`.

mod shell;

pub use shell::{
    energy_shell_volume, phase_space_volume, shell_constant, unit_ball_volume, IntegratorFactory, IntegratorSpec,
    MonteCarlo, PolarQuadrature, ShellIntegrator, ShellIntegratorRegistry,
};

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::grouprep::{FiniteGroup, Irrep};
use crate::linalg::{self, CMatrix};
use crate::orbits::PeriodicOrbit;
use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Agreement required between the two group-element conventions.
pub const CONVENTION_TOL: f64 = 1e-10;

/// `(2S+1) / (2πħ)^f`, the factor turning `|Ω|` into `ρ̄`.
pub fn total_weight(two_s: u32, hbar: f64, f: usize) -> f64 {
    (two_s + 1) as f64 / (2.0 * PI * hbar).powi(f as i32)
}

/// `s_α (2S+1) / (|Γ| (2πħ)^f)`; standard irreps of a double group carry no
/// spinor states and are rejected.
pub fn irrep_weight(group: &FiniteGroup, irrep: &Irrep, hbar: f64, f: usize) -> Result<f64> {
    if group.is_double && !irrep.is_extra() {
        return Err(Error::VanishingProjector { irrep: irrep.label.clone() });
    }
    Ok(irrep.dimension as f64 / group.geometric_order() as f64 * total_weight(group.two_s, hbar, f))
}

/// `ρ̄(E)` of the unprojected spin system.
pub fn mean_density(model: &dyn Model, integrator: &dyn ShellIntegrator, two_s: u32, energy: f64) -> Result<f64> {
    let (omega, _) = energy_shell_volume(model, integrator, energy)?;
    Ok(total_weight(two_s, model.hbar_eff(), model.dof()) * omega)
}

/// `ρ̄_α(E)`.
pub fn weyl_density(
    model: &dyn Model,
    group: &FiniteGroup,
    irrep: &Irrep,
    integrator: &dyn ShellIntegrator,
    energy: f64,
) -> Result<f64> {
    let w = irrep_weight(group, irrep, model.hbar_eff(), model.dof())?;
    let (omega, _) = energy_shell_volume(model, integrator, energy)?;
    Ok(w * omega)
}

/// `|Ω(E)|` and the phase-space volume tabulated on a uniform grid. Volumes
/// are interpolated by cubic Hermite polynomials using `d(volume)/dE = |Ω|`,
/// shells by Catmull-Rom splines; outside the grid the end cubic is
/// extrapolated.
#[derive(Debug, Clone)]
pub struct WeylTable {
    pub energies: Vec<f64>,
    pub shell: Vec<f64>,
    pub volume: Vec<f64>,
    /// Largest relative statistical error of the tabulated shells.
    pub relative_error: f64,
}

impl WeylTable {
    pub fn build(model: &dyn Model, integrator: &dyn ShellIntegrator, e_lo: f64, e_hi: f64, nodes: usize) -> Result<Self> {
        if !(e_hi > e_lo) || nodes < 4 {
            return Err(Error::InvalidParameter(format!("Weyl table needs e_hi > e_lo and ≥ 4 nodes, got [{e_lo}, {e_hi}] with {nodes}")));
        }
        let f = model.dof();
        let energies: Vec<f64> = (0..nodes).map(|k| e_lo + (e_hi - e_lo) * k as f64 / (nodes - 1) as f64).collect();
        let shells = integrator.configuration_integrals(model, &energies, (f as f64 - 2.0) / 2.0)?;
        let volumes = integrator.configuration_integrals(model, &energies, f as f64 / 2.0)?;
        let c_shell = shell_constant(f, model.mass());
        let c_vol = unit_ball_volume(f) * (2.0 * model.mass()).powf(f as f64 / 2.0);
        let relative_error = shells.iter().filter(|s| s.0 > 0.0).map(|s| s.1 / s.0).fold(0.0, f64::max);
        Ok(Self {
            energies,
            shell: shells.iter().map(|s| c_shell * s.0).collect(),
            volume: volumes.iter().map(|s| c_vol * s.0).collect(),
            relative_error,
        })
    }

    fn locate(&self, e: f64) -> (usize, f64, f64) {
        let n = self.energies.len();
        let h = self.energies[1] - self.energies[0];
        let k = (((e - self.energies[0]) / h).floor() as isize).clamp(0, n as isize - 2) as usize;
        (k, (e - self.energies[k]) / h, h)
    }

    fn shell_slope(&self, k: usize) -> f64 {
        let n = self.energies.len();
        let h = self.energies[1] - self.energies[0];
        match k {
            0 => (self.shell[1] - self.shell[0]) / h,
            k if k == n - 1 => (self.shell[n - 1] - self.shell[n - 2]) / h,
            _ => (self.shell[k + 1] - self.shell[k - 1]) / (2.0 * h),
        }
    }

    /// `|Ω(E)|`.
    pub fn shell_at(&self, e: f64) -> f64 {
        let (k, t, h) = self.locate(e);
        hermite(t, h, self.shell[k], self.shell[k + 1], self.shell_slope(k), self.shell_slope(k + 1))
    }

    /// Phase-space volume of `{H ≤ E}`.
    pub fn volume_at(&self, e: f64) -> f64 {
        let (k, t, h) = self.locate(e);
        hermite(t, h, self.volume[k], self.volume[k + 1], self.shell[k], self.shell[k + 1])
    }
}

fn hermite(t: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Element of `Γ` relating initial and final point; `d` relative to it.
    Geometric,
    /// Ordered product of double-group crossing elements.
    Double,
}

/// Group element and spin factor of an orbit under a convention. Both are
/// derived from `d_γ = U(g) d` of the unfolded path, so a switch between
/// conventions changes `g` by at most `ē` and `d` by the matching sign.
pub fn assign_group_element(group: &FiniteGroup, orbit: &PeriodicOrbit, convention: Convention) -> (usize, CMatrix) {
    match convention {
        Convention::Double => (orbit.g, orbit.d.clone()),
        Convention::Geometric => {
            let g = group.strip_sign(orbit.g);
            let unfolded = &group.elements[orbit.g].spin_lift * &orbit.d;
            (g, group.elements[g].spin_lift.adjoint() * unfolded)
        }
    }
}

/// `χ_α(g_p) tr(d_p)`, checked to agree between both conventions.
pub fn orbit_character(group: &FiniteGroup, irrep: &Irrep, orbit: &PeriodicOrbit) -> Result<Complex64> {
    let (gd, dd) = assign_group_element(group, orbit, Convention::Double);
    let (gg, dg) = assign_group_element(group, orbit, Convention::Geometric);
    let double = irrep.character(gd) * linalg::trace(&dd);
    let geometric = irrep.character(gg) * linalg::trace(&dg);
    let diff = (double - geometric).norm();
    if !(diff < CONVENTION_TOL) {
        return Err(Error::Tolerance(format!(
            "orbit {} in irrep {}: geometric and double conventions differ by {diff:.3e}",
            orbit.label, irrep.label
        )));
    }
    Ok(double)
}

/// Energy grid with Weyl and oscillatory parts of `ρ_α`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DensityGrid {
    pub irrep_label: String,
    pub energies: Vec<f64>,
    pub mean_part: Vec<f64>,
    pub oscillatory_part: Vec<f64>,
    pub smoothing_sigma: f64,
    pub hbar_eff: f64,
}

impl DensityGrid {
    pub fn total(&self) -> Vec<f64> {
        self.mean_part.iter().zip(&self.oscillatory_part).map(|(a, b)| a + b).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["E", "mean", "oscillatory", "total"]).map_err(csv_err)?;
        for (k, e) in self.energies.iter().enumerate() {
            let (m, o) = (self.mean_part[k], self.oscillatory_part[k]);
            w.write_record([e, &m, &o, &(m + o)].map(|x| format!("{x:.15e}"))).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One term of the orbit sum, prepared for evaluation at any energy.
#[derive(Debug, Clone)]
pub struct OrbitTerm {
    pub label: String,
    pub coefficient: Complex64,
    pub action: f64,
    pub period: f64,
    pub energy: f64,
}

impl OrbitTerm {
    /// `coefficient · e^{iS(E)/ħ}` with `S(E) = S + T (E - E_p)`.
    pub fn phase_factor(&self, e: f64, hbar: f64) -> Complex64 {
        let s = self.action + self.period * (e - self.energy);
        self.coefficient * Complex64::from_polar(1.0, s / hbar)
    }
}

/// Non-marginal orbits with `χ_α(g) tr(d) A`, sorted by label for a fixed
/// summation order.
pub fn orbit_terms(group: &FiniteGroup, irrep: &Irrep, orbits: &[PeriodicOrbit]) -> Result<Vec<OrbitTerm>> {
    let mut terms = Vec::with_capacity(orbits.len());
    for o in orbits {
        let chi_tr = orbit_character(group, irrep, o)?;
        if o.marginal {
            continue;
        }
        terms.push(OrbitTerm {
            label: o.label.clone(),
            coefficient: chi_tr * o.amplitude,
            action: o.action,
            period: o.period,
            energy: o.energy,
        });
    }
    terms.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(terms)
}

/// `(1/πħ) Re Σ_p ... e^{-σ²T²/2ħ²}` on `energies`.
pub fn oscillatory_part(terms: &[OrbitTerm], energies: &[f64], sigma: f64, hbar: f64) -> Vec<f64> {
    energies
        .par_iter()
        .map(|&e| {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in terms {
                let damping = (-(sigma * t.period / hbar).powi(2) / 2.0).exp();
                acc += t.phase_factor(e, hbar) * damping;
            }
            acc.re / (PI * hbar)
        })
        .collect()
}

/// Smoothed semiclassical `ρ_α` on an energy grid.
#[allow(clippy::too_many_arguments)]
pub fn oscillatory_density(
    group: &FiniteGroup,
    irrep: &Irrep,
    orbits: &[PeriodicOrbit],
    weyl: &WeylTable,
    f: usize,
    hbar: f64,
    energies: &[f64],
    sigma: f64,
) -> Result<DensityGrid> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("smoothing width must be positive, got {sigma}")));
    }
    let weight = irrep_weight(group, irrep, hbar, f)?;
    if orbits.is_empty() {
        warn!("irrep {}: empty orbit list, density is the Weyl term only", irrep.label);
    }
    let terms = orbit_terms(group, irrep, orbits)?;
    Ok(DensityGrid {
        irrep_label: irrep.label.clone(),
        energies: energies.to_vec(),
        mean_part: energies.iter().map(|&e| weight * weyl.shell_at(e)).collect(),
        oscillatory_part: oscillatory_part(&terms, energies, sigma, hbar),
        smoothing_sigma: sigma,
        hbar_eff: hbar,
    })
}

//! Pseudo-orbits: multisets of database orbits with bounded total period.

use crate::error::{Error, Result};
use crate::grouprep::{FiniteGroup, Irrep};
use crate::orbits::PeriodicOrbit;
use crate::traceformula::orbit_character;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Per-orbit factor entering pseudo-orbit weights.
///
/// `log Δ ∝ -Σ_j t_j / r_j` with `t_j = χ_α(g_j) tr(d_j) e^{-iμ_jπ/2} e^{iS_j/ħ}
/// / √|det(M_j - 1)|` over primitive orbits and their repetitions. Expanding
/// the exponential gives one term per multiset `{j^{k_j}}` with weight
/// `Π_j (t_j/r_j)^{k_j} / k_j!` and sign `(-1)^{Σk_j}`.
#[derive(Debug, Clone)]
pub struct OrbitFactor {
    pub label: String,
    pub period: f64,
    pub action: f64,
    pub energy: f64,
    /// `χ tr(d) e^{-iμπ/2} / (r √|det(M - 1)|)`.
    pub weight: Complex64,
}

impl OrbitFactor {
    pub fn from_orbit(group: &FiniteGroup, irrep: &Irrep, orbit: &PeriodicOrbit) -> Result<Self> {
        let chi_tr = orbit_character(group, irrep, orbit)?;
        let stability = Complex64::from_polar(1.0 / orbit.det_m_minus_1.abs().sqrt(), -(orbit.maslov as f64) * PI / 2.0);
        Ok(Self {
            label: orbit.label.clone(),
            period: orbit.period,
            action: orbit.action,
            energy: orbit.energy,
            weight: chi_tr * stability / orbit.repetition as f64,
        })
    }
}

/// Non-marginal factors of an orbit database, sorted by (period, label).
pub fn orbit_factors(group: &FiniteGroup, irrep: &Irrep, orbits: &[PeriodicOrbit]) -> Result<Vec<OrbitFactor>> {
    let mut out = Vec::new();
    for o in orbits {
        if o.marginal {
            continue;
        }
        out.push(OrbitFactor::from_orbit(group, irrep, o)?);
    }
    out.sort_by(|a, b| a.period.total_cmp(&b.period).then_with(|| a.label.cmp(&b.label)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOrbit {
    /// `(index into the factor list, multiplicity)`, indices increasing.
    pub members: Vec<(usize, u32)>,
    pub period: f64,
    /// Sum of member actions at their database energies.
    pub action: f64,
    /// `Σ k_j T_j E_j`, so that `S_A(E) = action + period·E - energy_moment`.
    pub energy_moment: f64,
    pub weight: Complex64,
    pub n: u32,
}

impl PseudoOrbit {
    pub fn empty() -> Self {
        Self {
            members: Vec::new(),
            period: 0.0,
            action: 0.0,
            energy_moment: 0.0,
            weight: Complex64::new(1.0, 0.0),
            n: 0,
        }
    }

    /// `S_A(E)` from first-order action interpolation of each member.
    pub fn action_at(&self, e: f64) -> f64 {
        self.action + self.period * e - self.energy_moment
    }

    /// `(-1)^{n_A}`.
    pub fn sign(&self) -> f64 {
        if self.n % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

pub const DEFAULT_CAP: usize = 1_000_000;

/// All multisets of factors with total period strictly below `cutoff`,
/// including the empty one; aborts once `cap` pseudo-orbits are exceeded.
pub fn enumerate_pseudo_orbits(factors: &[OrbitFactor], cutoff: f64, cap: usize) -> Result<Vec<PseudoOrbit>> {
    if let Some(f) = factors.iter().find(|f| !(f.period > 0.0)) {
        return Err(Error::InvalidParameter(format!("orbit {} has non-positive period", f.label)));
    }
    let mut out = Vec::new();
    if cutoff > 0.0 {
        out.push(PseudoOrbit::empty());
    }
    let mut stack = PseudoOrbit::empty();
    extend(factors, 0, cutoff, cap, &mut stack, &mut out)?;
    Ok(out)
}

fn extend(
    factors: &[OrbitFactor],
    start: usize,
    cutoff: f64,
    cap: usize,
    current: &mut PseudoOrbit,
    out: &mut Vec<PseudoOrbit>,
) -> Result<()> {
    for j in start..factors.len() {
        let f = &factors[j];
        if current.period + f.period >= cutoff {
            // factors are sorted by period
            break;
        }
        let saved = current.clone();
        let mut k = 0u32;
        let mut power = Complex64::new(1.0, 0.0);
        while current.period + f.period < cutoff {
            k += 1;
            power *= f.weight / k as f64;
            current.period += f.period;
            current.action += f.action;
            current.energy_moment += f.period * f.energy;
            current.n += 1;
            let mut with = current.clone();
            with.members.push((j, k));
            with.weight = saved.weight * power;
            if out.len() >= cap {
                return Err(Error::PseudoOrbitBlowup { cap });
            }
            out.push(with.clone());
            extend(factors, j + 1, cutoff, cap, &mut with, out)?;
        }
        *current = saved;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor(label: &str, period: f64, w: f64) -> OrbitFactor {
        OrbitFactor { label: label.into(), period, action: period, energy: 0.0, weight: Complex64::new(w, 0.0) }
    }

    /// Brute-force oracle: every multiplicity vector in a box.
    fn brute(periods: &[f64], cutoff: f64) -> Vec<Vec<u32>> {
        let maxk: Vec<u32> = periods.iter().map(|p| (cutoff / p).floor() as u32 + 1).collect();
        let mut out = Vec::new();
        let mut ks = vec![0u32; periods.len()];
        loop {
            let t: f64 = ks.iter().zip(periods).map(|(k, p)| *k as f64 * p).sum();
            if t < cutoff {
                out.push(ks.clone());
            }
            let mut i = 0;
            loop {
                if i == ks.len() {
                    return out;
                }
                ks[i] += 1;
                if ks[i] <= maxk[i] {
                    break;
                }
                ks[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let periods = [1.0, 1.4, 2.2];
        let factors: Vec<_> = periods.iter().enumerate().map(|(i, &p)| factor(&format!("p{i}"), p, 0.5)).collect();
        let got = enumerate_pseudo_orbits(&factors, 3.0, DEFAULT_CAP).unwrap();
        let mut got_sets: Vec<Vec<u32>> = got
            .iter()
            .map(|a| {
                let mut ks = vec![0u32; 3];
                for &(j, k) in &a.members {
                    ks[j] = k;
                }
                ks
            })
            .collect();
        let mut expected = brute(&periods, 3.0);
        got_sets.sort();
        expected.sort();
        assert_eq!(got_sets, expected);
        // {1,1,1} has period exactly 3.0 and is excluded
        assert!(!got_sets.contains(&vec![3, 0, 0]));
        assert!(got_sets.contains(&vec![2, 0, 0]));
        assert!(got_sets.contains(&vec![0, 2, 0]));
        assert!(!got_sets.contains(&vec![1, 0, 1]));
    }

    #[test]
    fn weights_are_exponential_coefficients() {
        let factors = vec![factor("a", 1.0, 0.3), factor("b", 1.5, -0.7)];
        let all = enumerate_pseudo_orbits(&factors, 10.0, DEFAULT_CAP).unwrap();
        assert_eq!(all[0], PseudoOrbit::empty());
        for a in &all {
            let mut w = Complex64::new(1.0, 0.0);
            let mut t = 0.0;
            for &(j, k) in &a.members {
                let fact: f64 = (1..=k).map(f64::from).product();
                w *= factors[j].weight.powu(k) / fact;
                t += k as f64 * factors[j].period;
            }
            assert!((a.weight - w).norm() < 1e-15);
            assert!((a.period - t).abs() < 1e-12);
            assert_eq!(a.n, a.members.iter().map(|m| m.1).sum::<u32>());
        }
    }

    #[test]
    fn cap_aborts() {
        let factors = vec![factor("a", 0.01, 1.0), factor("b", 0.013, 1.0)];
        assert!(matches!(enumerate_pseudo_orbits(&factors, 5.0, 1000), Err(Error::PseudoOrbitBlowup { cap: 1000 })));
    }
}

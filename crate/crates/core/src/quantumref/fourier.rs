//! Fourier analysis of level sequences against orbit periods.
//!
//! A level sequence weighted by a Hann window `w(E)` over `[lo, hi]` gives
//! `F(T) = Σ_n w(E_n) e^{-iE_nT/ħ}`; each orbit term `e^{iS(E)/ħ}` of the
//! oscillatory density produces a peak of `|F|` near `T = T_p`.

use crate::error::{Error, Result};
use crate::traceformula::{oscillatory_part, OrbitTerm};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HannWindow {
    pub lo: f64,
    pub hi: f64,
}

impl HannWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidParameter(format!("empty window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `sin²(π(E - lo)/(hi - lo))` inside the window, zero outside.
    pub fn weight(&self, e: f64) -> f64 {
        let x = (e - self.lo) / (self.hi - self.lo);
        if (0.0..=1.0).contains(&x) {
            (std::f64::consts::PI * x).sin().powi(2)
        } else {
            0.0
        }
    }

    /// Half-width of the main lobe in `T`, `4πħ/(hi - lo)`.
    pub fn resolution(&self, hbar: f64) -> f64 {
        4.0 * std::f64::consts::PI * hbar / (self.hi - self.lo)
    }

    /// Uniform grid of `samples` points spanning the window.
    pub fn grid(&self, samples: usize) -> Vec<f64> {
        let n = samples.max(2);
        (0..n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64).collect()
    }
}

/// `∫ w(E) ρ(E) e^{-iET/ħ} dE` by the trapezoidal rule on `grid`; the window
/// vanishes smoothly at both ends so the rule converges spectrally.
fn transform_density(window: &HannWindow, grid: &[f64], rho: &[f64], hbar: f64, times: &[f64]) -> Vec<Complex64> {
    let de = grid[1] - grid[0];
    let weighted: Vec<f64> = grid.iter().zip(rho).map(|(&e, &r)| window.weight(e) * r * de).collect();
    times
        .par_iter()
        .map(|&t| grid.iter().zip(&weighted).map(|(&e, &w)| Complex64::from_polar(w, -e * t / hbar)).sum())
        .collect()
}

/// Windowed transform of a level sequence, optionally minus the transform of
/// a smooth mean density sampled on `mean_samples` points.
pub fn level_transform(
    levels: &[f64],
    window: &HannWindow,
    hbar: f64,
    times: &[f64],
    mean: Option<&dyn Fn(f64) -> f64>,
    mean_samples: usize,
) -> Vec<Complex64> {
    let inside: Vec<(f64, f64)> = levels.iter().map(|&e| (e, window.weight(e))).filter(|p| p.1 > 0.0).collect();
    let mut out: Vec<Complex64> = times
        .par_iter()
        .map(|&t| inside.iter().map(|&(e, w)| Complex64::from_polar(w, -e * t / hbar)).sum())
        .collect();
    if let Some(f) = mean {
        let grid = window.grid(mean_samples);
        let rho: Vec<f64> = grid.iter().map(|&e| f(e)).collect();
        for (o, m) in out.iter_mut().zip(transform_density(window, &grid, &rho, hbar, times)) {
            *o -= m;
        }
    }
    out
}

/// Windowed transform of the unsmoothed semiclassical oscillatory density.
pub fn orbit_transform(terms: &[OrbitTerm], window: &HannWindow, hbar: f64, times: &[f64], samples: usize) -> Vec<Complex64> {
    let grid = window.grid(samples);
    let rho = oscillatory_part(terms, &grid, 0.0, hbar);
    transform_density(window, &grid, &rho, hbar, times)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub time: f64,
    pub height: f64,
}

/// Strict local maxima of `values`, refined by a parabola through the three
/// neighbouring samples of a uniform `times` grid.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<Peak> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b > c {
            let h = times[i + 1] - times[i];
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            out.push(Peak { time: times[i] + shift * h, height: b - 0.25 * (a - c) * shift });
        }
    }
    out
}

/// Match of one orbit period against the nearest peak of `|F|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakMatch {
    pub label: String,
    pub period: f64,
    /// `|χ tr(d) A|` of the orbit.
    pub predicted: f64,
    pub peak: Option<Peak>,
    /// `|T_peak - T_p| / T_p`.
    pub relative_offset: f64,
}

/// For each `(label, T_p, predicted height)` pick the local maximum of
/// `magnitudes` closest to `T_p`.
pub fn match_peaks(orbits: &[(String, f64, f64)], times: &[f64], magnitudes: &[f64]) -> Vec<PeakMatch> {
    let peaks = local_maxima(times, magnitudes);
    orbits
        .iter()
        .map(|(label, period, predicted)| {
            let peak = peaks
                .iter()
                .min_by(|a, b| (a.time - period).abs().total_cmp(&(b.time - period).abs()))
                .copied();
            let relative_offset = peak.map_or(f64::INFINITY, |p| (p.time - period).abs() / period);
            PeakMatch { label: label.clone(), period: *period, predicted: *predicted, peak, relative_offset }
        })
        .collect()
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of tie-averaged ranks.
/// NaN when either sequence is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

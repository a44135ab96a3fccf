//! Scenario files: one JSON document describing a full computation.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use symtrace::dynamics::ModelSpec;
use symtrace::grouprep::GroupSpec;
use symtrace::orbits::SearchConfig;
use symtrace::specdet::{DEFAULT_CAP, DEFAULT_ETA};
use symtrace::traceformula::IntegratorSpec;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Master seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    /// Symmetry used for folding and projection; the model's full symmetry
    /// group when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    pub spin: SpinBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    /// Read orbits from this JSONL file instead of searching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_database: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specdet: Option<SpecdetBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpinBlock {
    /// `2S`.
    pub two_s: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensityBlock {
    pub e_min: f64,
    pub e_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    pub sigma: f64,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorSpec,
    /// Interpolation nodes of the Weyl table.
    #[serde(default = "default_weyl_nodes")]
    pub weyl_nodes: usize,
    /// Irreps to evaluate; all admissible irreps when empty.
    #[serde(default)]
    pub irreps: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpecdetBlock {
    pub e_min: f64,
    pub e_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Longest pseudo-orbit period; half the Heisenberg time at `e_max` when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuantumBlock {
    pub shells: usize,
    /// Basis frequency; `1/√m` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Levels are computed up to this energy.
    pub e_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier: Option<FourierBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FourierBlock {
    pub window: [f64; 2],
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "default_fourier_points")]
    pub points: usize,
    /// Number of shortest primitive orbits matched against peaks.
    #[serde(default = "default_orbit_count")]
    pub orbit_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn default_points() -> usize {
    2001
}
fn default_integrator() -> IntegratorSpec {
    serde_json::from_str("{}").expect("integrator defaults")
}
fn default_weyl_nodes() -> usize {
    64
}
fn default_variants() -> Vec<String> {
    ["plus", "minus", "inv_plus", "inv_minus", "riemann_siegel"].map(String::from).to_vec()
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_cap() -> usize {
    DEFAULT_CAP
}
fn default_zero_tol() -> f64 {
    1e-10
}
fn default_fourier_points() -> usize {
    4000
}
fn default_orbit_count() -> usize {
    5
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn check(cond: bool, field: &str, msg: impl std::fmt::Display) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{field}: {msg}")))
    }
}

fn check_range(field: &str, lo: f64, hi: f64, points: usize) -> CliResult<()> {
    check(lo.is_finite() && hi.is_finite() && hi > lo, field, format!("need e_min < e_max, got [{lo}, {hi}]"))?;
    check(points >= 2, &format!("{field}.points"), "need at least 2 points")
}

impl Scenario {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Field-level checks that need no computation; irrep labels are checked
    /// once the character table exists.
    pub fn validate(&self) -> CliResult<()> {
        self.model.validate().map_err(|e| CliError::Validation(format!("model: {e}")))?;
        if let Some(s) = &self.search {
            check(s.energy.is_finite(), "search.energy", "not finite")?;
            check(s.t_max > 0.0, "search.t_max", "must be positive")?;
            check(s.trajectories > 0, "search.trajectories", "must be positive")?;
        }
        if let Some(d) = &self.density {
            check_range("density", d.e_min, d.e_max, d.points)?;
            check(d.sigma > 0.0, "density.sigma", format!("must be positive, got {}", d.sigma))?;
            check(d.weyl_nodes >= 4, "density.weyl_nodes", "need at least 4 nodes")?;
        }
        if let Some(s) = &self.specdet {
            check_range("specdet", s.e_min, s.e_max, s.points)?;
            check(s.eta >= 0.0, "specdet.eta", "must be non-negative")?;
            check(!s.variants.is_empty(), "specdet.variants", "empty list")?;
            if let Some(c) = s.cutoff {
                check(c > 0.0, "specdet.cutoff", "must be positive")?;
            }
        }
        if let Some(q) = &self.quantum {
            check(q.shells > 0, "quantum.shells", "must be positive")?;
            if let Some(w) = q.omega {
                check(w > 0.0, "quantum.omega", "must be positive")?;
            }
            if let Some(f) = &q.fourier {
                check(f.window[1] > f.window[0], "quantum.fourier.window", "need lo < hi")?;
                check(f.window[1] <= q.e_max, "quantum.fourier.window", "must end below quantum.e_max")?;
                check(f.t_max > f.t_min && f.t_min >= 0.0, "quantum.fourier", "need 0 ≤ t_min < t_max")?;
                check(f.points >= 3, "quantum.fourier.points", "need at least 3 points")?;
                check(f.orbit_count > 0, "quantum.fourier.orbit_count", "must be positive")?;
            }
        }
        Ok(())
    }

    /// Copy with every derived seed filled in from the master seed.
    pub fn resolved(&self) -> Scenario {
        let mut s = self.clone();
        if let Some(search) = &mut s.search {
            search.seed = self.seed;
        }
        if let Some(d) = &mut s.density {
            d.integrator.seed = self.seed.wrapping_add(1);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// The bundled C₃ / S=½ testbed.
pub const BUNDLED_C3_SPIN_HALF: &str = include_str!("../scenarios/c3_spin_half.json");

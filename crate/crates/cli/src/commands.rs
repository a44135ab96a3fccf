//! Command implementations. Every command writes its artifacts plus
//! `resolved_scenario.json` into the output directory.

use crate::error::{CliError, CliResult};
use crate::scenario::{FourierBlock, Scenario};
use log::{info, warn};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use symtrace::dynamics::{Model, ModelRegistry, OdeConfig};
use symtrace::grouprep::{analyse, build_double_group, build_point_group, write_character_table_csv, FiniteGroup, Irrep};
use symtrace::orbits::{find_orbits, read_orbits_jsonl, write_orbits_jsonl, PeriodicOrbit};
use symtrace::quantumref::fourier::{level_transform, match_peaks, orbit_transform, spearman, HannWindow, PeakMatch};
use symtrace::quantumref::{
    build_hamiltonian, kramers_check, project_spectrum, quantum_density, KramersReport, PlanarHamiltonian, ProjectedSpectrum,
    QuantumBasis, SpectrumExport,
};
use symtrace::specdet::{
    determinant_series, enumerate_pseudo_orbits, find_zeros, orbit_factors, write_zeros_csv, SeriesContext, VariantRegistry,
    Zero,
};
use symtrace::traceformula::{irrep_weight, orbit_terms, oscillatory_density, ShellIntegratorRegistry, WeylTable};

/// Everything derived from a scenario before any command-specific work.
pub struct Context {
    pub scenario: Scenario,
    pub out: PathBuf,
    pub model: Arc<dyn Model>,
    pub group: FiniteGroup,
    pub irreps: Vec<Irrep>,
}

impl Context {
    pub fn new(scenario: &Scenario, out: Option<&Path>, seed: Option<u64>) -> CliResult<Self> {
        let mut scenario = scenario.clone();
        if let Some(s) = seed {
            scenario.seed = s;
        }
        scenario.validate()?;
        let scenario = scenario.resolved();
        let out = out.map(Path::to_path_buf).unwrap_or_else(|| scenario.output.dir.clone());
        let model = ModelRegistry::with_builtins().build(&scenario.model)?;
        let spec = scenario.group.clone().unwrap_or_else(|| model.symmetry());
        let gamma = build_point_group(&spec)?;
        let group = build_double_group(&gamma, scenario.spin.two_s)?;
        let irreps = analyse(&group, scenario.seed)?;
        let ctx = Self { scenario, out, model, group, irreps };
        if let Some(d) = &ctx.scenario.density {
            for label in &d.irreps {
                ctx.irrep(label)?;
            }
        }
        Ok(ctx)
    }

    /// Irreps that carry states of the spin system: the extra irreps of a
    /// double group, all irreps otherwise.
    pub fn admissible_irreps(&self) -> Vec<&Irrep> {
        self.irreps.iter().filter(|i| !self.group.is_double || i.is_extra()).collect()
    }

    pub fn irrep(&self, label: &str) -> CliResult<&Irrep> {
        let irrep = self
            .irreps
            .iter()
            .find(|i| i.label == label)
            .ok_or_else(|| CliError::Validation(format!("density.irreps: unknown irrep '{label}'")))?;
        if self.group.is_double && !irrep.is_extra() {
            return Err(CliError::Validation(format!("density.irreps: irrep '{label}' is standard and carries no spinor states")));
        }
        Ok(irrep)
    }

    fn density_irreps(&self) -> CliResult<Vec<&Irrep>> {
        match &self.scenario.density {
            Some(d) if !d.irreps.is_empty() => d.irreps.iter().map(|l| self.irrep(l)).collect(),
            _ => Ok(self.admissible_irreps()),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(self.path(name))
    }

    fn write_resolved(&self) -> CliResult<PathBuf> {
        let mut s = self.scenario.clone();
        s.output.dir = self.out.clone();
        self.write_json("resolved_scenario.json", &s)
    }

    /// Orbit database: read from `orbit_database`, searched from the
    /// `search` block, or empty.
    pub fn orbits(&self) -> CliResult<Vec<PeriodicOrbit>> {
        if let Some(path) = &self.scenario.orbit_database {
            let file = File::open(path)
                .map_err(|e| CliError::Validation(format!("orbit_database: cannot open {}: {e}", path.display())))?;
            return Ok(read_orbits_jsonl(&self.group, BufReader::new(file))?);
        }
        match &self.scenario.search {
            Some(search) => {
                let set = find_orbits(self.model.as_ref(), &self.group, search, OdeConfig::default())?;
                info!(
                    "orbit search: {} candidates, {} converged, {} orbits",
                    set.report.candidates,
                    set.report.converged,
                    set.orbits.len()
                );
                Ok(set.orbits)
            }
            None => {
                warn!("no search block and no orbit database: using an empty orbit list");
                Ok(Vec::new())
            }
        }
    }

    fn weyl_table(&self, lo: f64, hi: f64) -> CliResult<WeylTable> {
        let (spec, nodes) = match &self.scenario.density {
            Some(d) => (d.integrator.clone(), d.weyl_nodes),
            None => (serde_json::from_str("{\"method\": \"polar_quadrature\"}")?, 64),
        };
        let integrator = ShellIntegratorRegistry::with_builtins().build(&spec)?;
        Ok(WeylTable::build(self.model.as_ref(), integrator.as_ref(), lo.max(0.0), hi, nodes)?)
    }

    pub fn hbar_eff(&self) -> f64 {
        self.scenario.model.hbar_eff
    }

    fn quantum_hamiltonian(&self) -> CliResult<(PlanarHamiltonian, f64)> {
        let q = self
            .scenario
            .quantum
            .as_ref()
            .ok_or_else(|| CliError::Validation("quantum: block required for this command".into()))?;
        let omega = q.omega.unwrap_or(1.0 / self.scenario.model.mass.sqrt());
        let basis = QuantumBasis { shells: q.shells, omega, two_s: self.scenario.spin.two_s };
        Ok((build_hamiltonian(&self.scenario.model, basis)?, q.e_max))
    }

    /// Projected spectra of all admissible irreps.
    pub fn spectra(&self) -> CliResult<(PlanarHamiltonian, Vec<ProjectedSpectrum>)> {
        let (ham, e_max) = self.quantum_hamiltonian()?;
        let spectra = self
            .admissible_irreps()
            .into_iter()
            .map(|irrep| project_spectrum(&ham, &self.group, irrep, e_max))
            .collect::<symtrace::Result<Vec<_>>>()?;
        Ok((ham, spectra))
    }
}

pub fn file_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

pub fn run_group(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let mut w = ctx.create("character_table.csv")?;
    write_character_table_csv(&ctx.group, &ctx.irreps, &mut w)?;
    w.flush()?;
    Ok(vec![ctx.path("character_table.csv"), ctx.write_resolved()?])
}

pub fn run_spin(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let checks = crate::checks::spin_checks();
    let path = ctx.write_json("spin_report.json", &checks)?;
    crate::checks::require(&checks)?;
    Ok(vec![path, ctx.write_resolved()?])
}

pub fn run_orbits(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let orbits = ctx.orbits()?;
    let mut w = ctx.create("orbits.jsonl")?;
    write_orbits_jsonl(&orbits, &mut w)?;
    w.flush()?;
    Ok(vec![ctx.path("orbits.jsonl"), ctx.write_resolved()?])
}

pub fn run_density(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let d = ctx
        .scenario
        .density
        .as_ref()
        .ok_or_else(|| CliError::Validation("density: block required for this command".into()))?;
    let orbits = ctx.orbits()?;
    let weyl = ctx.weyl_table(d.e_min - 5.0 * d.sigma, d.e_max + 5.0 * d.sigma)?;
    let energies = grid(d.e_min, d.e_max, d.points);
    let mut out = Vec::new();
    for irrep in ctx.density_irreps()? {
        let dens = oscillatory_density(&ctx.group, irrep, &orbits, &weyl, ctx.model.dof(), ctx.hbar_eff(), &energies, d.sigma)?;
        let name = format!("density_{}.csv", file_label(&irrep.label));
        let mut w = ctx.create(&name)?;
        dens.write_csv(&mut w)?;
        w.flush()?;
        out.push(ctx.path(&name));
    }
    out.push(ctx.write_resolved()?);
    Ok(out)
}

/// Smooth counting `N̄_α = w_α·vol(E)` and density `ρ̄_α = w_α·|Ω(E)|`.
pub struct WeylCounting {
    pub weight: f64,
    pub table: WeylTable,
}

impl symtrace::specdet::MeanCounting for WeylCounting {
    fn counting(&self, e: f64) -> f64 {
        self.weight * self.table.volume_at(e)
    }
    fn density(&self, e: f64) -> f64 {
        self.weight * self.table.shell_at(e)
    }
}

/// Per-irrep output of the determinant command.
pub struct SpecdetResult {
    pub irrep: String,
    pub cutoff: f64,
    pub pseudo_orbits: usize,
    pub zeros: Vec<Zero>,
}

pub fn specdet_results(ctx: &Context, orbits: &[PeriodicOrbit], write: bool) -> CliResult<Vec<SpecdetResult>> {
    let s = ctx
        .scenario
        .specdet
        .as_ref()
        .ok_or_else(|| CliError::Validation("specdet: block required for this command".into()))?;
    let registry = VariantRegistry::with_builtins();
    let variants = s.variants.iter().map(|v| registry.get(v)).collect::<symtrace::Result<Vec<_>>>()?;
    let table = ctx.weyl_table(s.e_min, s.e_max)?;
    let energies = grid(s.e_min, s.e_max, s.points);
    let longest = match (&ctx.scenario.search, &ctx.scenario.orbit_database) {
        (Some(search), None) => search.t_max,
        _ => orbits.iter().map(|o| o.period).fold(0.0, f64::max),
    };
    let mut results = Vec::new();
    for irrep in ctx.admissible_irreps() {
        let weight = irrep_weight(&ctx.group, irrep, ctx.hbar_eff(), ctx.model.dof())?;
        let mean = WeylCounting { weight, table: table.clone() };
        let half_th = std::f64::consts::PI * ctx.hbar_eff() * symtrace::specdet::MeanCounting::density(&mean, s.e_max);
        // pseudo-orbits beyond the database bound would be incomplete
        let cutoff = s.cutoff.unwrap_or_else(|| half_th.min(longest));
        let factors = orbit_factors(&ctx.group, irrep, orbits)?;
        let pseudo = enumerate_pseudo_orbits(&factors, cutoff, s.cap)?;
        let sc = SeriesContext { pseudo_orbits: &pseudo, mean: &mean, hbar: ctx.hbar_eff(), eta: s.eta };
        let label = file_label(&irrep.label);
        if write {
            let name = format!("specdet_{label}.csv");
            let mut w = ctx.create(&name)?;
            for (k, v) in variants.iter().enumerate() {
                let series = determinant_series(&sc, v.as_ref(), &irrep.label, &energies);
                let mut buf = Vec::new();
                series.write_csv(&mut buf)?;
                // one header for the whole file
                let text = String::from_utf8(buf).expect("csv is utf-8");
                let body = if k == 0 { text.as_str() } else { text.split_once('\n').map_or("", |x| x.1) };
                w.write_all(body.as_bytes())?;
            }
            w.flush()?;
        }
        let zeros = find_zeros(|e| sc.riemann_siegel(e), &energies, s.zero_tol);
        if write {
            let mut w = ctx.create(&format!("zeros_{label}.csv"))?;
            write_zeros_csv(&zeros, &mut w)?;
            w.flush()?;
        }
        results.push(SpecdetResult { irrep: irrep.label.clone(), cutoff, pseudo_orbits: pseudo.len(), zeros });
    }
    Ok(results)
}

pub fn run_specdet(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let orbits = ctx.orbits()?;
    let results = specdet_results(ctx, &orbits, true)?;
    let mut out: Vec<PathBuf> = results
        .iter()
        .flat_map(|r| {
            let l = file_label(&r.irrep);
            [ctx.path(&format!("specdet_{l}.csv")), ctx.path(&format!("zeros_{l}.csv"))]
        })
        .collect();
    out.push(ctx.write_resolved()?);
    Ok(out)
}

pub fn run_quantum(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let (ham, spectra) = ctx.spectra()?;
    let mut out = Vec::new();
    for s in &spectra {
        let name = format!("spectrum_{}.json", file_label(&s.irrep_label));
        out.push(ctx.write_json(&name, &SpectrumExport::new(s, &ham))?);
    }
    let reports = kramers_check(&ctx.group, &ctx.irreps, &spectra, 1e-8);
    for r in reports.iter().filter(|r| !r.passed) {
        warn!("degeneracy finding for irrep {}: {:?} gap {:.3e} {}", r.irrep, r.expectation, r.max_relative_gap, r.note);
    }
    out.push(ctx.write_json("kramers_report.json", &reports)?);
    out.push(ctx.write_resolved()?);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct FourierReport {
    pub window: [f64; 2],
    pub resolution: f64,
    pub matches: Vec<PeakMatch>,
    /// Semiclassical transform magnitude at each orbit period.
    pub semiclassical_heights: Vec<f64>,
    pub max_relative_offset: f64,
    pub rank_correlation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IrrepComparison {
    pub irrep: String,
    pub levels: usize,
    /// `(E, N_α(E), N̄_α(E))` at a few energies.
    pub counting: Vec<(f64, usize, f64)>,
    /// RMS of smoothed quantum minus semiclassical density over the density grid.
    pub density_rms: Option<f64>,
    pub fourier: Option<FourierReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub orbit_count: usize,
    pub warnings: Vec<String>,
    pub irreps: Vec<IrrepComparison>,
    pub kramers: Vec<KramersReport>,
}

/// Quantum-vs-semiclassical Fourier comparison for one irrep.
pub fn fourier_report(
    ctx: &Context,
    irrep: &Irrep,
    spectrum: &ProjectedSpectrum,
    orbits: &[PeriodicOrbit],
    mean: &WeylCounting,
    f: &FourierBlock,
) -> CliResult<FourierReport> {
    let window = HannWindow::new(f.window[0], f.window[1])?;
    let hbar = ctx.hbar_eff();
    let times = grid(f.t_min, f.t_max, f.points);
    let rho = |e: f64| symtrace::specdet::MeanCounting::density(mean, e);
    let quantum = level_transform(&spectrum.eigenvalues, &window, hbar, &times, Some(&rho), 8192);
    let mags: Vec<f64> = quantum.iter().map(|z| z.norm()).collect();
    let terms = orbit_terms(&ctx.group, irrep, orbits)?;
    let mut shortest: Vec<_> = orbits.iter().filter(|o| o.is_primitive() && !o.marginal).collect();
    shortest.sort_by(|a, b| a.period.total_cmp(&b.period).then_with(|| a.label.cmp(&b.label)));
    shortest.truncate(f.orbit_count);
    let targets: Vec<(String, f64, f64)> = shortest
        .iter()
        .map(|o| {
            let t = terms.iter().find(|t| t.label == o.label).expect("non-marginal orbit has a term");
            (o.label.clone(), o.period, t.coefficient.norm())
        })
        .collect();
    let matches = match_peaks(&targets, &times, &mags);
    let sc = orbit_transform(&terms, &window, hbar, &targets.iter().map(|t| t.1).collect::<Vec<_>>(), 8192);
    let heights: Vec<f64> = matches.iter().map(|m| m.peak.map_or(0.0, |p| p.height)).collect();
    let predicted: Vec<f64> = matches.iter().map(|m| m.predicted).collect();
    Ok(FourierReport {
        window: f.window,
        resolution: window.resolution(hbar),
        max_relative_offset: matches.iter().map(|m| m.relative_offset).fold(0.0, f64::max),
        rank_correlation: if matches.len() > 1 { spearman(&predicted, &heights) } else { f64::NAN },
        semiclassical_heights: sc.iter().map(|z| z.norm()).collect(),
        matches,
    })
}

pub fn compare_report(ctx: &Context) -> CliResult<CompareReport> {
    let orbits = ctx.orbits()?;
    let mut warnings = Vec::new();
    if orbits.is_empty() {
        warnings.push("empty orbit database: semiclassical side reduces to the Weyl term".to_string());
    }
    let (_, spectra) = ctx.spectra()?;
    let q = ctx.scenario.quantum.as_ref().expect("spectra need a quantum block");
    let lo = ctx.scenario.density.as_ref().map_or(0.0, |d| d.e_min - 5.0 * d.sigma).min(0.0);
    let table = ctx.weyl_table(lo, q.e_max)?;
    let mut irreps = Vec::new();
    for spectrum in &spectra {
        let irrep = ctx.irreps.iter().find(|i| i.label == spectrum.irrep_label).expect("spectrum irrep");
        let weight = irrep_weight(&ctx.group, irrep, ctx.hbar_eff(), ctx.model.dof())?;
        let mean = WeylCounting { weight, table: table.clone() };
        let counting = (1..=4)
            .map(|k| {
                let e = q.e_max * k as f64 / 4.0;
                (e, spectrum.counting(e), symtrace::specdet::MeanCounting::counting(&mean, e))
            })
            .collect();
        let density_rms = match &ctx.scenario.density {
            Some(d) if d.e_max + 5.0 * d.sigma <= q.e_max => {
                let energies = grid(d.e_min, d.e_max, d.points);
                let rho = |e: f64| symtrace::specdet::MeanCounting::density(&mean, e);
                let quantum = quantum_density(spectrum, &energies, d.sigma, ctx.hbar_eff(), Some(&rho))?;
                let semi = oscillatory_density(&ctx.group, irrep, &orbits, &table, ctx.model.dof(), ctx.hbar_eff(), &energies, d.sigma)?;
                let (qt, st) = (quantum.total(), semi.total());
                let ss: f64 = qt.iter().zip(&st).map(|(a, b)| (a - b).powi(2)).sum();
                Some((ss / energies.len() as f64).sqrt())
            }
            Some(_) => {
                warnings.push(format!("irrep {}: density range exceeds the quantum range; density comparison skipped", irrep.label));
                None
            }
            None => None,
        };
        let fourier = match &q.fourier {
            Some(f) if !orbits.is_empty() => Some(fourier_report(ctx, irrep, spectrum, &orbits, &mean, f)?),
            _ => None,
        };
        irreps.push(IrrepComparison { irrep: irrep.label.clone(), levels: spectrum.eigenvalues.len(), counting, density_rms, fourier });
    }
    let kramers = kramers_check(&ctx.group, &ctx.irreps, &spectra, 1e-8);
    for w in &warnings {
        warn!("{w}");
    }
    Ok(CompareReport { orbit_count: orbits.len(), warnings, irreps, kramers })
}

pub fn run_compare(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let report = compare_report(ctx)?;
    Ok(vec![ctx.write_json("compare_report.json", &report)?, ctx.write_resolved()?])
}

pub fn run_selftest(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let checks = crate::checks::selftest(ctx)?;
    let path = ctx.write_json("selftest_report.json", &checks)?;
    crate::checks::require(&checks)?;
    Ok(vec![path, ctx.write_resolved()?])
}

//! Periodic orbits of the fundamental-domain dynamics.
//!
//! A fundamental-domain orbit of period `T` is a full-space trajectory with
//! `Φ_T(x₀) = R_g x₀`. The search scans long folded trajectories for close
//! returns on a radial section line inside the domain and refines each
//! candidate by Gauss-Newton on `(x₀, T)` with the energy fixed and a phase
//! condition orthogonal to the flow.

mod io;
mod stability;

pub use io::{read_orbits_jsonl, write_orbits_jsonl, OrbitRecord};
pub use stability::{
    det_m_minus_one, maslov_index, reduced_monodromy, transverse_frame, variational_flow, TransverseFrame,
    VariationalResult,
};

use crate::dynamics::{
    allowed_radius, flow_solver, fold_state, Boundary, integrate_folded, integrate_folded_observed, FundamentalDomain, Model,
    OdeConfig, PhaseState,
};
use crate::error::{Error, Result};
use crate::grouprep::FiniteGroup;
use crate::linalg::{self, CMatrix};
use crate::spinalg::SpinContext;
use crate::spintransport::transport_folded;
use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `|det(M - 1)|` below which an orbit counts as marginal.
pub const MARGINAL_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub energy: f64,
    pub t_max: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_trajectory_length")]
    pub trajectory_length: f64,
    /// Phase-space distance on the section accepted as a close return.
    #[serde(default = "default_recurrence_tol")]
    pub recurrence_tol: f64,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iterations")]
    pub newton_iterations: usize,
    /// Section line angle measured from the lower boundary of the domain;
    /// defaults to the bisector.
    #[serde(default)]
    pub section_angle: Option<f64>,
    #[serde(default = "default_min_period")]
    pub min_period: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_trajectories() -> usize {
    16
}
fn default_trajectory_length() -> f64 {
    300.0
}
fn default_recurrence_tol() -> f64 {
    0.08
}
fn default_max_candidates() -> usize {
    4000
}
fn default_newton_tol() -> f64 {
    1e-11
}
fn default_newton_iterations() -> usize {
    40
}
fn default_min_period() -> f64 {
    0.1
}

impl SearchConfig {
    pub fn new(energy: f64, t_max: f64) -> Self {
        Self {
            energy,
            t_max,
            trajectories: default_trajectories(),
            trajectory_length: default_trajectory_length(),
            recurrence_tol: default_recurrence_tol(),
            max_candidates: default_max_candidates(),
            newton_tol: default_newton_tol(),
            newton_iterations: default_newton_iterations(),
            section_angle: None,
            min_period: default_min_period(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub label: String,
    pub energy: f64,
    /// Starting point in fundamental-domain coordinates.
    pub initial: PhaseState,
    pub period: f64,
    pub primitive_period: f64,
    pub repetition: u32,
    pub action: f64,
    pub monodromy: DMatrix<f64>,
    pub maslov: i32,
    pub det_m_minus_1: f64,
    pub marginal: bool,
    /// Double-group element from the ordered product of crossings.
    pub g: usize,
    pub g_label: String,
    pub d: CMatrix,
    pub tr_d: Complex64,
    pub amplitude: Complex64,
}

impl PeriodicOrbit {
    pub fn is_primitive(&self) -> bool {
        self.repetition == 1
    }

    /// `T_prim e^{-iμπ/2} / √|det(M - 1)|`, zero for marginal orbits.
    pub fn compute_amplitude(primitive_period: f64, maslov: i32, det: f64) -> Complex64 {
        if det.abs() < MARGINAL_THRESHOLD {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(primitive_period / det.abs().sqrt(), -(maslov as f64) * PI / 2.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchReport {
    pub candidates: usize,
    pub converged: usize,
    pub dropped: usize,
}

/// Result of [`find_orbits`]: primitives first (sorted by action, then
/// element label), followed by repetitions up to `t_max`.
#[derive(Debug, Clone)]
pub struct OrbitSet {
    pub orbits: Vec<PeriodicOrbit>,
    pub report: SearchReport,
}

impl OrbitSet {
    pub fn primitives(&self) -> impl Iterator<Item = &PeriodicOrbit> {
        self.orbits.iter().filter(|o| o.is_primitive())
    }
}

/// Geometric action of an element on `(q, p)` in `f` dimensions.
pub fn phase_space_matrix(group: &FiniteGroup, g: usize, f: usize) -> DMatrix<f64> {
    let r = group.geometric_of(g).matrix;
    let mut out = DMatrix::zeros(2 * f, 2 * f);
    for i in 0..f {
        for j in 0..f {
            out[(i, j)] = r[(i, j)];
            out[(f + i, f + j)] = r[(i, j)];
        }
    }
    out
}

fn state_vector(x: &PhaseState) -> DVector<f64> {
    DVector::from_iterator(2 * x.dof(), x.q.iter().chain(&x.p).copied())
}

fn vector_state(v: &DVector<f64>, f: usize) -> PhaseState {
    PhaseState::new(v.rows(0, f).iter().copied().collect(), v.rows(f, f).iter().copied().collect(), 0.0)
}

fn flow_vector(model: &dyn Model, x: &DVector<f64>) -> DVector<f64> {
    let f = model.dof();
    let mut g = vec![0.0; f];
    model.gradient(&x.as_slice()[..f], &mut g);
    let m = model.mass();
    DVector::from_iterator(2 * f, (0..f).map(|i| x[f + i] / m).chain(g.iter().map(|v| -v)))
}

/// Transverse monodromy and Maslov index of the orbit through `initial`
/// (fundamental-domain coordinates) with geometric return element `g`.
pub fn monodromy_and_maslov(
    model: &dyn Model,
    group: &FiniteGroup,
    initial: &PhaseState,
    period: f64,
    g: usize,
    config: OdeConfig,
) -> Result<(DMatrix<f64>, i32, f64)> {
    let f = model.dof();
    let var = variational_flow(model, initial, period, config)?;
    let r = phase_space_matrix(group, g, f);
    let j = r.transpose() * &var.jacobian;
    let frame = transverse_frame(model, initial)?;
    let m = reduced_monodromy(&frame, &j);
    let mu = maslov_index(var.conjugate_points, &m);
    let det = det_m_minus_one(&m);
    Ok((m, mu, det))
}

/// Distance below which a starting point counts as lying on the domain
/// boundary.
const ANCHOR_CLEARANCE: f64 = 1e-7;
const ANCHOR_SAMPLES: usize = 32;

fn clearance(fd: &FundamentalDomain, q: &[f64]) -> f64 {
    fd.boundary_value(Boundary::Lower, q).min(fd.boundary_value(Boundary::Upper, q))
}

/// A start on the boundary, in particular at the apex of the wedge, makes
/// the final crossing depend on rounding; such orbits are re-anchored at the
/// sampled point of the same orbit farthest from the boundary.
fn interior_anchor(
    model: &dyn Model,
    group: &FiniteGroup,
    initial: &PhaseState,
    period: f64,
    config: OdeConfig,
) -> Result<PhaseState> {
    let fd = FundamentalDomain::for_group(group)?;
    if fd.is_full_space() || clearance(&fd, &initial.q) >= ANCHOR_CLEARANCE {
        return Ok(initial.clone());
    }
    let times: Vec<f64> = (1..ANCHOR_SAMPLES).map(|k| initial.t + period * k as f64 / ANCHOR_SAMPLES as f64).collect();
    let path = integrate_folded(model, group, initial, period, config, &times)?;
    let best = path
        .samples
        .iter()
        .map(|(_, s)| s)
        .max_by(|a, b| clearance(&fd, &a.q).total_cmp(&clearance(&fd, &b.q)))
        .filter(|s| clearance(&fd, &s.q) >= ANCHOR_CLEARANCE);
    Ok(best.map_or_else(|| initial.clone(), |s| PhaseState::new(s.q.clone(), s.p.clone(), initial.t)))
}

/// Fill in `g`, `d`, `tr d` and amplitude for an orbit given by its starting
/// point and period.
pub fn decorate_orbit(
    model: &dyn Model,
    group: &FiniteGroup,
    ctx: &SpinContext,
    initial: &PhaseState,
    period: f64,
    config: OdeConfig,
) -> Result<PeriodicOrbit> {
    let anchored = interior_anchor(model, group, initial, period, config)?;
    let initial = &anchored;
    let folded = integrate_folded(model, group, initial, period, config, &[])?;
    let g = folded.accumulated_g;
    let (monodromy, maslov, det) = monodromy_and_maslov(model, group, initial, period, g, config)?;
    let d = transport_folded(model, group, ctx, &folded, config)?.d;
    let tr_d = linalg::trace(&d);
    Ok(PeriodicOrbit {
        label: String::new(),
        energy: folded.energy,
        initial: initial.clone(),
        period,
        primitive_period: period,
        repetition: 1,
        action: folded.action,
        monodromy,
        maslov,
        det_m_minus_1: det,
        marginal: det.abs() < MARGINAL_THRESHOLD,
        g,
        g_label: group.label(g).to_string(),
        d,
        tr_d,
        amplitude: PeriodicOrbit::compute_amplitude(period, maslov, det),
    })
}

/// `r`-th repetition of a primitive orbit.
pub fn repetition(group: &FiniteGroup, orbit: &PeriodicOrbit, r: u32) -> PeriodicOrbit {
    let mut m = orbit.monodromy.clone();
    let mut d = orbit.d.clone();
    for _ in 1..r {
        m = &m * &orbit.monodromy;
        d = &d * &orbit.d;
    }
    let det = det_m_minus_one(&m);
    let maslov = orbit.maslov * r as i32;
    let g = group.power(orbit.g, r as usize);
    PeriodicOrbit {
        label: format!("{}.r{}", orbit.label, r),
        period: orbit.period * r as f64,
        repetition: r,
        action: orbit.action * r as f64,
        det_m_minus_1: det,
        marginal: det.abs() < MARGINAL_THRESHOLD,
        maslov,
        g,
        g_label: group.label(g).to_string(),
        tr_d: linalg::trace(&d),
        d,
        monodromy: m,
        amplitude: PeriodicOrbit::compute_amplitude(orbit.primitive_period, maslov, det),
        ..orbit.clone()
    }
}

/// Point where a folded trajectory crosses the section line, with the group
/// element accumulated up to that time.
#[derive(Debug, Clone)]
struct SectionPoint {
    t: f64,
    y: Vec<f64>,
    g: usize,
}

#[derive(Debug, Clone, Copy)]
struct Section {
    normal: [f64; 2],
    along: [f64; 2],
}

impl Section {
    fn new(fd: &FundamentalDomain, offset: Option<f64>) -> Self {
        let a = fd.lower + offset.unwrap_or(fd.width / 2.0);
        Self { normal: [-a.sin(), a.cos()], along: [a.cos(), a.sin()] }
    }

    fn value(&self, q: &[f64]) -> f64 {
        self.normal[0] * q[0] + self.normal[1] * q[1]
    }

    fn on_ray(&self, q: &[f64]) -> bool {
        self.along[0] * q[0] + self.along[1] * q[1] > 0.0
    }
}

/// Section crossings of a folded trajectory in either direction, refined to
/// full step accuracy. Both directions are kept so that orbits circulating
/// one way only are still seen.
fn section_points(
    model: &dyn Model,
    group: &FiniteGroup,
    section: Section,
    initial: &PhaseState,
    duration: f64,
    config: OdeConfig,
) -> Result<Vec<SectionPoint>> {
    let f = model.dof();
    let mut raw: Vec<(f64, Vec<f64>, f64, usize, f64)> = Vec::new();
    integrate_folded_observed(model, group, initial, duration, config, &[], |step, g| {
        let (a, b) = (section.value(&step.y0[..f]), section.value(&step.y1[..f]));
        if (a < 0.0) != (b < 0.0) && section.on_ray(&step.y1[..f]) {
            raw.push((step.t0, step.y0.to_vec(), step.t1 - step.t0, g, a.signum()));
        }
    })?;
    let solver = flow_solver(model, config);
    let mut out = Vec::with_capacity(raw.len());
    for (t0, y0, h, g, side) in raw {
        let (mut lo, mut hi) = (0.0, h);
        let mut y = solver.fixed_step(t0, &y0, hi);
        for _ in 0..100 {
            if hi - lo < 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let ym = solver.fixed_step(t0, &y0, mid);
            if section.value(&ym[..f]).signum() == side {
                lo = mid;
            } else {
                hi = mid;
                y = ym;
            }
        }
        y.truncate(2 * f);
        out.push(SectionPoint { t: t0 + hi, y, g });
    }
    Ok(out)
}

fn random_start(model: &dyn Model, fd: &FundamentalDomain, energy: f64, rng: &mut ChaCha8Rng) -> Result<PhaseState> {
    let f = model.dof();
    let m = model.mass();
    for _ in 0..100_000 {
        let mut dir: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(0.05..=1.0).contains(&norm) {
            continue;
        }
        dir.iter_mut().for_each(|x| *x /= norm);
        let rmax = match allowed_radius(model, &dir, energy, 1e3) {
            Some(r) => r,
            None => continue,
        };
        let r = rmax * rng.gen_range(0.0f64..1.0).powf(1.0 / f as f64);
        let q: Vec<f64> = dir.iter().map(|d| d * r).collect();
        if !fd.contains(&q) {
            continue;
        }
        let kinetic = energy - model.potential(&q);
        if kinetic <= 1e-6 * energy.abs().max(1e-12) {
            continue;
        }
        let pn = (2.0 * m * kinetic).sqrt();
        let mut pd: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pnorm = pd.iter().map(|x| x * x).sum::<f64>().sqrt();
        if pnorm < 0.05 || pnorm > 1.0 {
            continue;
        }
        pd.iter_mut().for_each(|x| *x *= pn / pnorm);
        return Ok(PhaseState::new(q, pd, 0.0));
    }
    Err(Error::InvalidParameter(format!("no classically allowed point found at E = {energy}")))
}

#[derive(Debug, Clone)]
struct Candidate {
    seed: Vec<f64>,
    period: f64,
    g: usize,
    distance: f64,
}

/// Gauss-Newton on `(x₀, T)` for `Φ_T(x₀) = R_g x₀`, `H(x₀) = E` and
/// `F(x_seed)·(x₀ - x_seed) = 0`.
fn refine(
    model: &dyn Model,
    group: &FiniteGroup,
    cand: &Candidate,
    energy: f64,
    cfg: &SearchConfig,
    ode: OdeConfig,
) -> Option<(PhaseState, f64)> {
    let f = model.dof();
    let n = 2 * f;
    let r = phase_space_matrix(group, cand.g, f);
    let seed = DVector::from_column_slice(&cand.seed);
    let fseed = flow_vector(model, &seed);
    let residual = |x: &DVector<f64>, t: f64| -> Option<(DVector<f64>, VariationalResult)> {
        if t <= 0.0 {
            return None;
        }
        let state = vector_state(x, f);
        let var = variational_flow(model, &state, t, ode).ok()?;
        let end = state_vector(&var.final_state);
        let mut res = DVector::zeros(n + 2);
        res.rows_mut(0, n).copy_from(&(end - &r * x));
        res[n] = model.energy(&state.q, &state.p) - energy;
        res[n + 1] = fseed.dot(&(x - &seed));
        Some((res, var))
    };
    let mut x = seed.clone();
    let mut t = cand.period;
    let (mut res, mut var) = residual(&x, t)?;
    let scale = 1.0 + energy.abs();
    for _ in 0..cfg.newton_iterations {
        let norm = res.norm();
        if norm < cfg.newton_tol * scale {
            break;
        }
        let mut jac = DMatrix::zeros(n + 2, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&(&var.jacobian - &r));
        let fend = flow_vector(model, &state_vector(&var.final_state));
        jac.view_mut((0, n), (n, 1)).copy_from(&fend);
        let xs = vector_state(&x, f);
        let mut grad = vec![0.0; f];
        model.gradient(&xs.q, &mut grad);
        let m = model.mass();
        for i in 0..f {
            jac[(n, i)] = grad[i];
            jac[(n, f + i)] = xs.p[i] / m;
        }
        for i in 0..n {
            jac[(n + 1, i)] = fseed[i];
        }
        let svd = jac.svd(true, true);
        let step = svd.solve(&(-&res), 1e-12).ok()?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let xn = &x + step.rows(0, n) * lambda;
            let tn = t + step[n] * lambda;
            if let Some((rn, vn)) = residual(&xn, tn) {
                if rn.norm() < norm {
                    x = xn;
                    t = tn;
                    res = rn;
                    var = vn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let closure = res.rows(0, n).norm();
    if closure > 1e-9 || res[n].abs() > 1e-9 * scale || t < cfg.min_period || t > cfg.t_max * 1.0001 {
        return None;
    }
    Some((vector_state(&x, f), t))
}

fn phase_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Search primitive orbits up to `t_max`, decorate them and append their
/// repetitions.
pub fn find_orbits(
    model: &dyn Model,
    group: &FiniteGroup,
    config: &SearchConfig,
    ode: OdeConfig,
) -> Result<OrbitSet> {
    let fd = FundamentalDomain::for_group(group)?;
    let section = Section::new(&fd, config.section_angle);
    let energy = config.energy;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let starts: Vec<PhaseState> = (0..config.trajectories)
        .map(|_| random_start(model, &fd, energy, &mut rng))
        .collect::<Result<_>>()?;
    let scans: Vec<Vec<SectionPoint>> = starts
        .par_iter()
        .map(|s| section_points(model, group, section, s, config.trajectory_length, ode).unwrap_or_default())
        .collect();

    let mut candidates = Vec::new();
    for pts in &scans {
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let period = pts[j].t - pts[i].t;
                if period > config.t_max {
                    break;
                }
                if period < config.min_period {
                    continue;
                }
                let distance = phase_distance(&pts[i].y, &pts[j].y);
                if distance < config.recurrence_tol {
                    let g = group.mul(group.inverse(pts[i].g), pts[j].g);
                    candidates.push(Candidate { seed: pts[i].y.clone(), period, g, distance });
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.period.total_cmp(&b.period)));
    candidates.truncate(config.max_candidates);
    let mut report = SearchReport { candidates: candidates.len(), ..Default::default() };
    info!("orbit search: {} recurrence candidates", candidates.len());

    let converged: Vec<Option<(PhaseState, f64)>> =
        candidates.par_iter().map(|c| refine(model, group, c, energy, config, ode)).collect();
    report.converged = converged.iter().filter(|c| c.is_some()).count();
    report.dropped = converged.len() - report.converged;

    // reduce to fundamental-domain primitives starting on the section
    let reduced: Vec<Option<(PhaseState, f64, f64, usize)>> = converged
        .into_par_iter()
        .map(|c| {
            let (x, t) = c?;
            let (q, p, _) = fold_state(group, &x.q, &x.p).ok()?;
            let x = PhaseState::new(q, p, 0.0);
            let pts = section_points(model, group, section, &x, t, ode).ok()?;
            let first = pts.first()?;
            let start = PhaseState::new(first.y[..x.dof()].to_vec(), first.y[x.dof()..].to_vec(), 0.0);
            let start = interior_anchor(model, group, &start, t, ode).ok()?;
            let mut prim = t;
            for r in (2..=pts.len()).rev() {
                let tr = t / r as f64;
                if tr < config.min_period {
                    continue;
                }
                if let Ok(ft) = integrate_folded(model, group, &start, tr, ode, &[]) {
                    if (state_vector(&ft.final_state) - state_vector(&start)).norm() < 1e-7 {
                        prim = tr;
                        break;
                    }
                }
            }
            let ft = integrate_folded(model, group, &start, prim, ode, &[]).ok()?;
            Some((start, prim, ft.action, ft.accumulated_g))
        })
        .collect();
    // cyclic shifts conjugate g, so duplicates are keyed by action and class
    let classes = group.conjugacy_classes();
    let class_of = |g: usize| classes.iter().position(|c| c.contains(&g)).unwrap_or(usize::MAX);
    let mut sorted: Vec<_> = reduced.into_iter().flatten().collect();
    sorted.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.3.cmp(&b.3)));
    let mut unique: Vec<(PhaseState, f64, f64, usize)> = Vec::new();
    for cand in sorted {
        let duplicate =
            unique.iter().any(|u| (u.2 - cand.2).abs() < 1e-6 && class_of(u.3) == class_of(cand.3));
        if !duplicate {
            unique.push(cand);
        }
    }
    debug!("orbit search: {} distinct primitives", unique.len());

    let ctx = SpinContext::new(group.two_s);
    let decorated: Vec<Result<PeriodicOrbit>> =
        unique.par_iter().map(|(x, t, _, _)| decorate_orbit(model, group, &ctx, x, *t, ode)).collect();
    let mut primitives = Vec::new();
    for d in decorated {
        match d {
            Ok(o) => primitives.push(o),
            Err(e) => {
                debug!("dropping orbit: {e}");
                report.dropped += 1;
            }
        }
    }
    primitives.sort_by(|a, b| a.action.total_cmp(&b.action).then_with(|| a.g_label.cmp(&b.g_label)));
    let mut orbits = Vec::new();
    for (k, o) in primitives.iter_mut().enumerate() {
        o.label = format!("p{k}");
    }
    for o in &primitives {
        orbits.push(o.clone());
    }
    for o in &primitives {
        let mut r = 2u32;
        while o.period * r as f64 <= config.t_max {
            orbits.push(repetition(group, o, r));
            r += 1;
        }
    }
    Ok(OrbitSet { orbits, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ModelSpec, PlanarC3};
    use crate::grouprep::{build_double_group, build_point_group, GroupSpec};

    fn model(lambda: f64, quartic: f64, kappa: f64) -> PlanarC3 {
        PlanarC3 {
            spec: ModelSpec {
                family: "planar_c3".into(),
                mass: 1.0,
                lambda,
                epsilon: 0.0,
                mu: 0.0,
                quartic,
                kappa,
                hbar_eff: 0.02,
                params: vec![],
            },
        }
    }

    fn c6() -> FiniteGroup {
        let g = build_point_group(&GroupSpec::Cn { n: 3, axis: [0.0, 0.0, 1.0] }).unwrap();
        build_double_group(&g, 1).unwrap()
    }

    #[test]
    fn harmonic_circle_is_a_domain_orbit() {
        let m = model(0.0, 0.0, 0.0);
        let g = c6();
        let a = PI / 3.0;
        let x = PhaseState::new(vec![a.cos(), a.sin()], vec![-a.sin(), a.cos()], 0.0);
        let o = decorate_orbit(&m, &g, &SpinContext::new(1), &x, 2.0 * PI / 3.0, OdeConfig::default()).unwrap();
        let geo = g.geometric_of(o.g);
        assert!((geo.angle - 2.0 * PI / 3.0).abs() < 1e-12);
        assert_eq!(g.elements[o.g].sign, 1);
        // isotropic oscillator: transverse motion rotates by ωT = 2π/3
        let tr = o.monodromy.trace();
        assert!((tr - 2.0 * (2.0 * PI / 3.0).cos()).abs() < 1e-8);
        assert!((o.monodromy.determinant() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn repetition_composes() {
        let m = model(0.0, 0.0, 0.3);
        let g = c6();
        let a = PI / 3.0;
        let x = PhaseState::new(vec![a.cos(), a.sin()], vec![-a.sin(), a.cos()], 0.0);
        let o = decorate_orbit(&m, &g, &SpinContext::new(1), &x, 2.0 * PI / 3.0, OdeConfig::default()).unwrap();
        let r2 = repetition(&g, &o, 2);
        assert!((r2.action - 2.0 * o.action).abs() < 1e-14);
        assert!((&r2.monodromy - &o.monodromy * &o.monodromy).norm() < 1e-14);
        assert_eq!(r2.g, g.mul(o.g, o.g));
        let direct = decorate_orbit(&m, &g, &SpinContext::new(1), &x, 4.0 * PI / 3.0, OdeConfig::default()).unwrap();
        assert_eq!(direct.g, r2.g);
        assert!(linalg::distance(&direct.d, &r2.d) < 1e-9);
    }
}

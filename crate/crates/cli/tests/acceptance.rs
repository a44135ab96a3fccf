//! End-to-end acceptance run: one PASS/FAIL line per criterion. The zero
//! placement part of criterion 8 is qualitative and only reported.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};
use symtrace::dynamics::{integrate_folded, FundamentalDomain, Model, ModelRegistry, ModelSpec, OdeConfig, PhaseState};
use symtrace::grouprep::{analyse, build_double_group, build_point_group, FiniteGroup, GroupSpec};
use symtrace::linalg;
use symtrace::quantumref::{build_hamiltonian, project_spectrum, QuantumBasis};
use symtrace::specdet::{
    enumerate_pseudo_orbits, find_zeros, orbit_factors, DeterminantVariant, MeanCounting, RiemannSiegel, SeriesContext,
    DEFAULT_CAP,
};
use symtrace::spinalg::SpinContext;
use symtrace::spintransport::{transport_folded, transport_full};
use symtrace::traceformula::{irrep_weight, total_weight, ShellIntegratorRegistry, WeylTable};
use symtrace_cli::checks::{convention_check, group_checks, spin_checks};
use symtrace_cli::commands::{compare_report, WeylCounting};
use symtrace_cli::scenario::{Scenario, BUNDLED_C3_SPIN_HALF};
use symtrace_cli::Context;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn hard(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

fn double(spec: GroupSpec, two_s: u32) -> FiniteGroup {
    build_double_group(&build_point_group(&spec).unwrap(), two_s).unwrap()
}

fn c3() -> GroupSpec {
    GroupSpec::Cn { n: 3, axis: [0.0, 0.0, 1.0] }
}

fn c3v() -> GroupSpec {
    GroupSpec::Cnv { n: 3, axis: [0.0, 0.0, 1.0], mirror_normal: [1.0, 0.0, 0.0] }
}

fn d2() -> GroupSpec {
    GroupSpec::Dn { n: 2, axis: [1.0, 0.0, 0.0], secondary_axis: [0.0, 1.0, 0.0] }
}

/// Element covering the geometric matrix `m` with the given sign.
fn element_for(group: &FiniteGroup, m: nalgebra::Matrix3<f64>, sign: i8) -> usize {
    let geo = group.geometric.iter().position(|g| (g.matrix - m).abs().max() < 1e-12).expect("element present");
    group.find(geo, sign).expect("lift present")
}

fn rot(axis: [f64; 3], angle: f64) -> nalgebra::Matrix3<f64> {
    linalg::rotation_matrix(axis, angle)
}

fn bundled() -> Scenario {
    Scenario::from_json(BUNDLED_C3_SPIN_HALF).unwrap()
}

fn criterion_1() -> Outcome {
    // C3 ⊗ spin-½: the 120° lift generates a cyclic group of order 6
    let g6 = double(c3(), 1);
    let r = element_for(&g6, rot([0.0, 0.0, 1.0], 2.0 * PI / 3.0), 1);
    let ebar = g6.ebar().unwrap();
    let powers: Vec<usize> = (0..6).map(|k| g6.power(r, k)).collect();
    let mut distinct = powers.clone();
    distinct.sort();
    distinct.dedup();
    let cyclic = g6.order() == 6
        && distinct.len() == 6
        && (0..6).all(|a| (0..6).all(|b| g6.mul(powers[a], powers[b]) == powers[(a + b) % 6]));
    let c6 = cyclic && g6.power(r, 3) == ebar && g6.verify_table();

    // {e, r_x, r_y, r_x r_y} ⊗ spin-½ against the unit quaternions ±{1, i, j, k}
    let q8 = double(d2(), 1);
    let i = element_for(&q8, rot([1.0, 0.0, 0.0], PI), 1);
    let j = element_for(&q8, rot([0.0, 1.0, 0.0], PI), 1);
    let ebar = q8.ebar().unwrap();
    let units = [q8.identity_index, i, j, q8.mul(i, j)];
    // Hamilton products of basis units: (sign, unit index)
    let table = [
        [(1, 0), (1, 1), (1, 2), (1, 3)],
        [(1, 1), (-1, 0), (1, 3), (-1, 2)],
        [(1, 2), (-1, 3), (-1, 0), (1, 1)],
        [(1, 3), (1, 2), (-1, 1), (-1, 0)],
    ];
    let phi = |s: i32, u: usize| if s > 0 { units[u] } else { q8.mul(ebar, units[u]) };
    let mut images = Vec::new();
    let mut hom = true;
    for s1 in [1, -1] {
        for u1 in 0..4 {
            images.push(phi(s1, u1));
            for s2 in [1, -1] {
                for u2 in 0..4 {
                    let (s, u) = table[u1][u2];
                    hom &= q8.mul(phi(s1, u1), phi(s2, u2)) == phi(s * s1 * s2, u);
                }
            }
        }
    }
    images.sort();
    images.dedup();
    let quaternion = q8.order() == 8 && images.len() == 8 && hom && q8.verify_table();
    Outcome::hard(c6 && quaternion, format!("C6 with g^3 = ebar: {c6}; Q8 isomorphism: {quaternion}"))
}

fn criterion_2() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    for (name, spec) in [("C3", c3()), ("C3v", c3v()), ("D2", d2())] {
        let g = double(spec, 1);
        let irreps = analyse(&g, 11).unwrap();
        for c in group_checks(&g, &irreps) {
            if !c.passed {
                notes.push(format!("{name} {} = {:.2e}", c.name, c.value));
            }
            passed &= c.passed;
        }
        let extra: Vec<(String, i32)> =
            irreps.iter().filter(|i| i.is_extra()).map(|i| (i.label.clone(), i.fs_indicator)).collect();
        if name == "C3" {
            let want = vec![("1".to_string(), 0), ("3".to_string(), 1), ("5".to_string(), 0)];
            passed &= extra == want;
            notes.push(format!("C6 extra FS {extra:?}"));
        }
    }
    Outcome::hard(passed, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let checks = spin_checks();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let worst = checks.iter().filter(|c| c.name.starts_with("two_pi")).map(|c| c.value).fold(0.0, f64::max);
    Outcome::hard(failed.is_empty(), format!("{} checks, max 2pi-rotation defect {worst:.1e}, failed {failed:?}", checks.len()))
}

/// Random state in the fundamental domain on the shell `H = E`.
fn random_state(model: &dyn Model, fd: &FundamentalDomain, rng: &mut ChaCha8Rng) -> PhaseState {
    let f = model.dof();
    loop {
        let e = rng.gen_range(0.3..1.0);
        let q: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let v = model.potential(&q);
        if !fd.contains(&q) || v >= e {
            continue;
        }
        let dir: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(0.1..1.0).contains(&n) {
            continue;
        }
        let speed = (2.0 * model.mass() * (e - v)).sqrt();
        return PhaseState::new(q, dir.iter().map(|x| x * speed / n).collect(), 0.0);
    }
}

struct TransportSample {
    unitarity: f64,
    identity: f64,
}

/// Full-space transport for unitarity; the unfolded `d_γ` is rebuilt from
/// segments integrated in the unfolded frame, starting at `a_j · x_j` with
/// `a_j = h_1···h_j`.
fn transport_sample(model: &dyn Model, groups: &[(SpinContext, FiniteGroup)], seed: u64) -> Option<TransportSample> {
    let (ctx, group) = &groups[seed as usize % groups.len()];
    let fd = FundamentalDomain::for_group(group).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = OdeConfig::default();
    let init = random_state(model, &fd, &mut rng);
    let t = rng.gen_range(1.0..=200.0);
    let full = transport_full(model, ctx, &init, t, cfg).ok()?;
    let folded = integrate_folded(model, group, &init, t, cfg, &[]).ok()?;
    let d_fold = transport_folded(model, group, ctx, &folded, cfg).ok()?;
    let mut a = group.identity_index;
    let mut d_unf = linalg::identity(ctx.dim());
    for (k, seg) in folded.segments.iter().enumerate() {
        if k > 0 {
            a = group.mul(a, folded.crossings[k - 1].element);
        }
        let geo = group.geometric_of(a);
        let start = PhaseState::new(geo.apply(&seg.start.q), geo.apply(&seg.start.p), seg.start.t);
        let piece = transport_full(model, ctx, &start, seg.end.t - seg.start.t, cfg).ok()?;
        d_unf = piece.d * d_unf;
    }
    let g = folded.accumulated_g;
    let predicted = group.elements[g].spin_lift.adjoint() * d_unf;
    Some(TransportSample {
        unitarity: linalg::unitarity_defect(&full.d).max(linalg::unitarity_defect(&d_fold.d)),
        identity: linalg::distance(&d_fold.d, &predicted),
    })
}

fn criterion_4() -> Outcome {
    let registry = ModelRegistry::with_builtins();
    let mut passed = true;
    let mut notes = Vec::new();
    for family in ["planar_c3", "threed_c3"] {
        let spec: ModelSpec = serde_json::from_value(json!({
            "family": family, "lambda": 1.0, "mu": 0.3, "quartic": 0.1, "kappa": 0.4, "hbar_eff": 0.05
        }))
        .unwrap();
        let model = registry.build(&spec).unwrap();
        let groups: Vec<(SpinContext, FiniteGroup)> =
            [1, 2, 3].iter().map(|&s| (SpinContext::new(s), double(model.symmetry(), s))).collect();
        let mut samples = Vec::new();
        let mut skipped = 0;
        let mut seed = 0u64;
        while samples.len() < 100 {
            let batch: Vec<_> =
                (seed..seed + 100).into_par_iter().map(|s| transport_sample(model.as_ref(), &groups, s)).collect();
            seed += 100;
            for s in batch {
                match s {
                    Some(s) if samples.len() < 100 => samples.push(s),
                    Some(_) => {}
                    None => skipped += 1,
                }
            }
        }
        let unit = samples.iter().map(|s| s.unitarity).fold(0.0, f64::max);
        let ident = samples.iter().map(|s| s.identity).fold(0.0, f64::max);
        passed &= unit < 1e-8 && ident < 1e-7;
        notes.push(format!("{family}: max |d'd-1| {unit:.1e}, max folded identity {ident:.1e}, skipped {skipped}"));
    }

    // cyclic invariance of tr(d) along periodic orbits of the testbed
    let ctx = Context::new(&bundled(), None, None).unwrap();
    let orbits = ctx.orbits().unwrap();
    let spin = SpinContext::new(ctx.scenario.spin.two_s);
    let cfg = OdeConfig::default();
    let worst = orbits
        .par_iter()
        .filter(|o| o.is_primitive())
        .map(|o| {
            let times: Vec<f64> = (0..5).map(|k| o.period * k as f64 / 5.0).collect();
            let path = integrate_folded(ctx.model.as_ref(), &ctx.group, &o.initial, o.period, cfg, &times).unwrap();
            path.samples
                .iter()
                .map(|(_, s)| {
                    let start = PhaseState::new(s.q.clone(), s.p.clone(), 0.0);
                    let fold = integrate_folded(ctx.model.as_ref(), &ctx.group, &start, o.period, cfg, &[]).unwrap();
                    let d = transport_folded(ctx.model.as_ref(), &ctx.group, &spin, &fold, cfg).unwrap().d;
                    (linalg::trace(&d) - o.tr_d).norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    passed &= worst < 1e-8;
    notes.push(format!("cyclic tr(d) spread {worst:.1e} over {} orbits", orbits.iter().filter(|o| o.is_primitive()).count()));
    Outcome::hard(passed, notes.join("; "))
}

fn criterion_5() -> Outcome {
    let ctx = Context::new(&bundled(), None, None).unwrap();
    let orbits = ctx.orbits().unwrap();
    let c = convention_check(&ctx.group, &ctx.irreps, &orbits);
    Outcome::hard(c.passed && !orbits.is_empty(), format!("{} orbits, max difference {:.1e}", orbits.len(), c.value))
}

fn weyl_table(model: &dyn Model, lo: f64, hi: f64, nodes: usize) -> WeylTable {
    let spec = serde_json::from_value(json!({"method": "polar_quadrature"})).unwrap();
    let integ = ShellIntegratorRegistry::with_builtins().build(&spec).unwrap();
    WeylTable::build(model, integ.as_ref(), lo, hi, nodes).unwrap()
}

fn criterion_6() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    // Σ_α s_α w_α = (2S+1)/(2πħ)^f for every double group
    let mut sum_defect: f64 = 0.0;
    for spec in [c3(), c3v(), d2()] {
        for two_s in [1, 3] {
            let g = double(spec.clone(), two_s);
            let irreps = analyse(&g, 5).unwrap();
            for (hbar, f) in [(0.05, 2), (0.2, 3)] {
                let sum: f64 = irreps
                    .iter()
                    .filter(|i| i.is_extra())
                    .map(|i| i.dimension as f64 * irrep_weight(&g, i, hbar, f).unwrap())
                    .sum();
                let expected = (two_s + 1) as f64 / (2.0 * PI * hbar).powi(f as i32);
                sum_defect = sum_defect.max((sum / expected - 1.0).abs());
                sum_defect = sum_defect.max((total_weight(two_s, hbar, f) / expected - 1.0).abs());
            }
        }
    }
    passed &= sum_defect < 1e-14;
    notes.push(format!("irrep sum defect {sum_defect:.1e}"));

    // isotropic oscillator: N(E) = (2S+1) K(K+1)/2 with K = ⌊E/ħ⌋
    let hbar = 0.01;
    let spec: ModelSpec =
        serde_json::from_value(json!({"family": "planar_c3", "lambda": 0.0, "hbar_eff": hbar})).unwrap();
    let model = ModelRegistry::with_builtins().build(&spec).unwrap();
    let table = weyl_table(model.as_ref(), 0.0, 1.0, 64);
    let two_s = 1;
    let w = total_weight(two_s, hbar, 2);
    let mut worst: f64 = 0.0;
    let mut min_levels = usize::MAX;
    for k in 0..=600 {
        let e = 0.7 + 0.3 * k as f64 / 600.0;
        let big_k = (e / hbar + 1e-9).floor() as usize;
        let exact = (two_s as usize + 1) * big_k * (big_k + 1) / 2;
        min_levels = min_levels.min(exact);
        worst = worst.max((w * table.volume_at(e) / exact as f64 - 1.0).abs());
    }
    passed &= worst < 0.02 && min_levels >= 200;
    notes.push(format!("oscillator counting max deviation {:.2}% (at least {min_levels} levels)", 100.0 * worst));

    // projected quantum counting, weakly perturbed testbed
    let hbar = 0.03;
    let spec: ModelSpec = serde_json::from_value(json!({
        "family": "planar_c3", "lambda": 0.1, "quartic": 0.1, "kappa": 0.3, "hbar_eff": hbar
    }))
    .unwrap();
    let model = ModelRegistry::with_builtins().build(&spec).unwrap();
    let group = double(c3(), 1);
    let irreps = analyse(&group, 5).unwrap();
    let ham = build_hamiltonian(&spec, QuantumBasis { shells: 48, omega: 1.0, two_s: 1 }).unwrap();
    let table = weyl_table(model.as_ref(), 0.0, 1.0, 64);
    let mut worst: f64 = 0.0;
    let mut min_levels = usize::MAX;
    for irrep in irreps.iter().filter(|i| i.is_extra()) {
        let s = project_spectrum(&ham, &group, irrep, 1.0).unwrap();
        let w = irrep_weight(&group, irrep, hbar, 2).unwrap();
        for k in 0..=200 {
            let e = 0.6 + 0.4 * k as f64 / 200.0;
            let n = s.counting(e);
            min_levels = min_levels.min(n);
            worst = worst.max((n as f64 / (w * table.volume_at(e)) - 1.0).abs());
        }
    }
    passed &= worst < 0.05;
    notes.push(format!("projected counting max deviation {:.2}% (at least {min_levels} levels per irrep)", 100.0 * worst));
    Outcome::hard(passed, notes.join("; "))
}

fn criterion_7_and_9() -> (Outcome, Outcome) {
    let ctx = Context::new(&bundled(), None, None).unwrap();
    let report = compare_report(&ctx).unwrap();
    let window = ctx.scenario.quantum.as_ref().unwrap().fourier.as_ref().unwrap().window;
    let mut passed = true;
    let mut notes = Vec::new();
    for c in &report.irreps {
        let below = c.counting.iter().find(|x| (x.0 - window[0]).abs() < 1e-12).map_or(0, |x| x.1);
        let f = c.fourier.as_ref().expect("orbits found");
        let ok = below >= 300 && f.max_relative_offset <= 0.02 && f.rank_correlation >= 0.8 && f.matches.len() == 5;
        passed &= ok;
        notes.push(format!(
            "irrep {}: {below} levels below window, max offset {:.2}%, rank correlation {:.3}",
            c.irrep,
            100.0 * f.max_relative_offset,
            f.rank_correlation
        ));
    }
    let seven = Outcome::hard(passed, notes.join("; "));

    let kramers = &report.kramers;
    let ok = !kramers.is_empty() && kramers.iter().all(|k| k.passed && k.levels_checked > 0);
    let detail = kramers
        .iter()
        .map(|k| format!("irrep {} {:?}: {} levels, max gap {:.1e}", k.irrep, k.expectation, k.levels_checked, k.max_relative_gap))
        .collect::<Vec<_>>()
        .join("; ");
    (seven, Outcome::hard(ok, detail))
}

/// Exactness checks gate; zero placement is appended as a qualitative note.
fn criterion_8() -> Outcome {
    let mut v: serde_json::Value = serde_json::from_str(BUNDLED_C3_SPIN_HALF).unwrap();
    v["model"]["hbar_eff"] = json!(0.16);
    v["search"] = json!({"energy": 0.6, "t_max": 11.0, "trajectories": 200, "recurrence_tol": 0.2});
    v["quantum"] = json!({"shells": 30, "omega": 1.0, "e_max": 0.95});
    let scenario = Scenario::from_json(&v.to_string()).unwrap();
    let ctx = Context::new(&scenario, None, None).unwrap();
    let orbits = ctx.orbits().unwrap();
    let (_, spectra) = ctx.spectra().unwrap();
    let (lo, hi) = (0.45, 0.8);
    let table = weyl_table(ctx.model.as_ref(), 0.0, 1.0, 64);
    let energies: Vec<f64> = (0..=3500).map(|k| lo + (hi - lo) * k as f64 / 3500.0).collect();
    let mut hard = true;
    let mut zeros_ok = true;
    let mut hard_notes = Vec::new();
    let mut notes = Vec::new();
    for irrep in ctx.admissible_irreps() {
        let w = irrep_weight(&ctx.group, irrep, ctx.hbar_eff(), 2).unwrap();
        let mean = WeylCounting { weight: w, table: table.clone() };
        let cutoff = PI * ctx.hbar_eff() * mean.density(hi);
        let factors = orbit_factors(&ctx.group, irrep, &orbits).unwrap();
        let pseudo = enumerate_pseudo_orbits(&factors, cutoff, DEFAULT_CAP).unwrap();
        let sc = SeriesContext { pseudo_orbits: &pseudo, mean: &mean, hbar: ctx.hbar_eff(), eta: 0.0 };

        // real by construction and equal to the explicit half sum plus its conjugate
        let mut imag: f64 = 0.0;
        let mut explicit: f64 = 0.0;
        for &e in energies.iter().step_by(50) {
            let z = RiemannSiegel.evaluate(&sc, e);
            imag = imag.max(z.im.abs());
            let th = PI * ctx.hbar_eff() * mean.density(e);
            let half: Complex64 = pseudo
                .iter()
                .filter(|a| a.period < th)
                .map(|a| a.weight * a.sign() * Complex64::from_polar(1.0, a.action_at(e) / ctx.hbar_eff()))
                .sum::<Complex64>()
                * Complex64::from_polar(1.0, -PI * mean.counting(e));
            explicit = explicit.max((z.re - 2.0 * half.re).abs());
        }
        // no orbits: 2 cos(π N̄)
        let empty = enumerate_pseudo_orbits(&[], cutoff, DEFAULT_CAP).unwrap();
        let bare = SeriesContext { pseudo_orbits: &empty, mean: &mean, hbar: ctx.hbar_eff(), eta: 0.0 };
        let closed = energies
            .iter()
            .map(|&e| (bare.riemann_siegel(e) - 2.0 * (PI * mean.counting(e)).cos()).abs())
            .fold(0.0, f64::max);
        hard &= imag < 1e-12 && closed < 1e-12 && explicit < 1e-10;
        hard_notes.push(format!("irrep {}: imag {imag:.1e}, half-sum {explicit:.1e}, closed form {closed:.1e}", irrep.label));

        let levels = &spectra.iter().find(|s| s.irrep_label == irrep.label).unwrap().eigenvalues;
        let nearest = |e: f64| levels.iter().map(|l| (l - e).abs()).fold(f64::INFINITY, f64::min);
        let zeros = find_zeros(|e| sc.riemann_siegel(e), &energies, 1e-12);
        let bare_zeros = find_zeros(|e| bare.riemann_siegel(e), &energies, 1e-12);
        let score = |zs: &[symtrace::specdet::Zero]| -> Vec<f64> {
            zs.iter().take(5).map(|z| nearest(z.energy) * mean.density(z.energy)).collect()
        };
        let with = score(&zeros);
        let without = score(&bare_zeros);
        let ok = with.len() == 5 && with.iter().all(|&d| d <= 1.0);
        zeros_ok &= ok;
        let in_window = levels.iter().filter(|&&l| l >= lo && l <= hi).count();
        notes.push(format!(
            "irrep {} (FS {}): {} pseudo-orbits below {cutoff:.1}, {} zeros for {in_window} levels, distances/spacing {:?} (no-orbit {:?})",
            irrep.label,
            irrep.fs_indicator,
            pseudo.len(),
            zeros.len(),
            with.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>(),
            without.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>()
        ));
    }
    let gate = if zeros_ok { "PASS" } else { "FAIL" };
    Outcome::hard(
        hard,
        format!("{}; zeros within one spacing (qualitative) {gate}: {} orbits; {}", hard_notes.join("; "), orbits.len(), notes.join("; ")),
    )
}

fn report(out: &mut impl Write, label: &str, o: &Outcome, elapsed: Duration, budget: Duration) -> bool {
    let passed = o.passed && elapsed <= budget;
    let status = if passed { "PASS" } else { "FAIL" };
    writeln!(out, "criterion {label}: {status} [{:.1} s, budget {} s] {}", elapsed.as_secs_f64(), budget.as_secs(), o.detail)
        .unwrap();
    passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    let mut err = std::io::stderr();
    let secs = Duration::from_secs;
    let mut ok = true;
    let (o, t) = timed(criterion_1);
    ok &= report(&mut err, "1", &o, t, secs(1));
    let (o, t) = timed(criterion_2);
    ok &= report(&mut err, "2", &o, t, secs(5));
    let (o, t) = timed(criterion_3);
    ok &= report(&mut err, "3", &o, t, secs(5));
    let (o, t) = timed(criterion_4);
    ok &= report(&mut err, "4", &o, t, secs(300));
    let (o, t) = timed(criterion_5);
    ok &= report(&mut err, "5", &o, t, secs(3600));
    let (o, t) = timed(criterion_6);
    ok &= report(&mut err, "6", &o, t, secs(600));
    let ((seven, nine), t) = timed(criterion_7_and_9);
    ok &= report(&mut err, "7", &seven, t, secs(3600));
    let (o, t8) = timed(criterion_8);
    ok &= report(&mut err, "8", &o, t8, secs(1800));
    ok &= report(&mut err, "9", &nine, t, secs(600));
    err.flush().unwrap();
    if !ok {
        std::process::exit(1);
    }
}

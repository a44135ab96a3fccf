//! Fundamental domains of groups acting about the z axis.
//!
//! Cyclic groups `C_n` use the half-open wedge `0 ≤ φ < 2π/n`; groups with
//! vertical mirrors use the half-wedge between two adjacent mirror lines,
//! starting at the mirror line with the smallest angle in `[0, π)`.
//!
//! Group elements accumulate by right multiplication: with `q_full = g q_FD`,
//! leaving the domain into the copy `h·FD` gives `g ← g·h`. Backward crossings
//! of a cyclic wedge use the double-group inverse of the generator, so a full
//! positive turn accumulates `g^n` (which is `ē` for half-integer spin).

use super::ode::{Flow, OdeConfig, Step};
use super::{flow_solver, Model, PhaseState};
use crate::error::{Error, Result};
use crate::grouprep::FiniteGroup;
use std::f64::consts::PI;
use std::io::Write;

const ANGLE_TOL: f64 = 1e-9;
const EVENT_TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone)]
pub struct FundamentalDomain {
    /// Polar angle of the lower boundary line.
    pub lower: f64,
    /// Opening angle (`2π` for the trivial group).
    pub width: f64,
    /// Element `h` with `g ← g·h` on exit through the lower boundary.
    pub lower_exit: Option<usize>,
    pub upper_exit: Option<usize>,
}

impl FundamentalDomain {
    pub fn for_group(group: &FiniteGroup) -> Result<Self> {
        let unsupported = || Error::InvalidParameter("folding needs a point group acting about the z axis".into());
        let mut rotations = Vec::new();
        let mut mirrors = Vec::new();
        for &idx in &group.geometric_subset {
            let geo = group.geometric_of(idx);
            let m = &geo.matrix;
            if (m[(2, 2)] - 1.0).abs() > 1e-9 || m[(0, 2)].abs() > 1e-9 || m[(1, 2)].abs() > 1e-9 {
                return Err(unsupported());
            }
            if geo.proper {
                rotations.push(idx);
            } else {
                // reflection through a vertical plane: the line direction is
                // the +1 eigenvector in the xy plane
                let line = (m[(1, 0)]).atan2(m[(0, 0)] + 1.0);
                let line = if m[(0, 0)] + 1.0 < 1e-12 && m[(1, 0)].abs() < 1e-12 { PI / 2.0 } else { line };
                mirrors.push((line.rem_euclid(PI), idx));
            }
        }
        let n = rotations.len();
        if mirrors.is_empty() {
            if n == 1 {
                return Ok(Self { lower: 0.0, width: 2.0 * PI, lower_exit: None, upper_exit: None });
            }
            let step = 2.0 * PI / n as f64;
            let gen = rotations
                .iter()
                .copied()
                .find(|&i| {
                    let geo = group.geometric_of(i);
                    geo.axis[2] > 0.5 && (geo.angle - step).abs() < ANGLE_TOL
                })
                .ok_or_else(unsupported)?;
            return Ok(Self {
                lower: 0.0,
                width: step,
                lower_exit: Some(group.inverse(gen)),
                upper_exit: Some(gen),
            });
        }
        if mirrors.len() != n {
            return Err(unsupported());
        }
        mirrors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let width = PI / n as f64;
        let lower = mirrors[0].0;
        let upper_line = (lower + width).rem_euclid(PI);
        let upper = mirrors
            .iter()
            .find(|(a, _)| angle_close(*a, upper_line))
            .map(|&(_, i)| i)
            .ok_or_else(unsupported)?;
        Ok(Self { lower, width, lower_exit: Some(mirrors[0].1), upper_exit: Some(upper) })
    }

    pub fn is_full_space(&self) -> bool {
        self.lower_exit.is_none()
    }

    /// Angle of `q` measured from the lower boundary, in `[0, 2π)`.
    fn relative_angle(&self, q: &[f64]) -> f64 {
        (q[1].atan2(q[0]) - self.lower).rem_euclid(2.0 * PI)
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        if self.is_full_space() || (q[0] == 0.0 && q[1] == 0.0) {
            return true;
        }
        self.relative_angle(q) < self.width
    }

    /// Signed distances from the boundary lines, positive on the inner side.
    pub fn boundary_value(&self, b: Boundary, q: &[f64]) -> f64 {
        match b {
            Boundary::Lower => -q[0] * self.lower.sin() + q[1] * self.lower.cos(),
            Boundary::Upper => {
                let a = self.lower + self.width;
                q[0] * a.sin() - q[1] * a.cos()
            }
        }
    }

    /// Boundary through which a point just outside the domain has left.
    pub fn exit_boundary(&self, q: &[f64]) -> Boundary {
        let psi = self.relative_angle(q);
        // outside means psi ∈ [width, 2π); split the gap at its midpoint
        if psi - self.width < (2.0 * PI - psi) {
            Boundary::Upper
        } else {
            Boundary::Lower
        }
    }

    pub fn exit_element(&self, b: Boundary) -> Option<usize> {
        match b {
            Boundary::Lower => self.lower_exit,
            Boundary::Upper => self.upper_exit,
        }
    }
}

fn angle_close(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(PI);
    d < ANGLE_TOL || PI - d < ANGLE_TOL
}

/// Map `(q, p)` into the fundamental domain: returns `(h⁻¹q, h⁻¹p, h)` with
/// `h ∈ Γ` the element whose copy of the domain contains `q`.
pub fn fold_state(group: &FiniteGroup, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let fd = FundamentalDomain::for_group(group)?;
    if fd.contains(q) {
        return Ok((q.to_vec(), p.to_vec(), group.identity_index));
    }
    for &h in &group.geometric_subset {
        let geo = group.geometric_of(h);
        let qf = geo.apply_inverse(q);
        if fd.contains(&qf) {
            return Ok((qf, geo.apply_inverse(p), h));
        }
    }
    Err(Error::OutsideFundamentalDomain)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Crossing {
    pub time: f64,
    pub element: usize,
    pub boundary: Boundary,
}

/// Piece of the folded trajectory between consecutive crossings, in
/// fundamental-domain coordinates.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: PhaseState,
    pub end: PhaseState,
}

#[derive(Debug, Clone)]
pub struct FoldedTrajectory {
    pub segments: Vec<Segment>,
    pub crossings: Vec<Crossing>,
    /// `(segment index, state)` at the requested sample times.
    pub samples: Vec<(usize, PhaseState)>,
    /// Ordered product `h_1·h_2···h_n` in the double group.
    pub accumulated_g: usize,
    pub energy: f64,
    pub energy_drift: f64,
    pub action: f64,
    pub final_state: PhaseState,
}

/// Integrate inside the fundamental domain, refolding at every boundary
/// crossing.
pub fn integrate_folded(
    model: &dyn Model,
    group: &FiniteGroup,
    initial: &PhaseState,
    duration: f64,
    config: OdeConfig,
    sample_times: &[f64],
) -> Result<FoldedTrajectory> {
    integrate_folded_observed(model, group, initial, duration, config, sample_times, |_, _| {})
}

/// As [`integrate_folded`], also reporting every accepted step that lies
/// inside one segment together with the group element accumulated so far.
pub fn integrate_folded_observed<O>(
    model: &dyn Model,
    group: &FiniteGroup,
    initial: &PhaseState,
    duration: f64,
    config: OdeConfig,
    sample_times: &[f64],
    mut observer: O,
) -> Result<FoldedTrajectory>
where
    O: FnMut(&Step, usize),
{
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be positive, got {duration}")));
    }
    let fd = FundamentalDomain::for_group(group)?;
    if !fd.contains(&initial.q) {
        return Err(Error::OutsideFundamentalDomain);
    }
    let f = model.dof();
    let energy = model.energy(&initial.q, &initial.p);
    let scale = energy.abs().max(1e-300);
    let solver = flow_solver(model, config);
    let t0 = initial.t;
    let t_end = t0 + duration;

    let mut segments = Vec::new();
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next = sample_times.partition_point(|&t| t < t0);
    let mut seg_start = initial.clone();
    let mut g = group.identity_index;
    let mut drift = 0.0f64;

    let (_, y_final) = solver.run(t0, &initial.to_flow_vector(), t_end, |step| {
        let q1 = &step.y1[..f];
        let inside = fd.contains(q1);
        let (t_stop, y_stop, exit) = if inside {
            (step.t1, step.y1.to_vec(), None)
        } else {
            let b = fd.exit_boundary(q1);
            let (tau, y_out) = locate_crossing(&solver, &fd, b, step, f)?;
            (step.t0 + tau, y_out, Some(b))
        };
        while next < sample_times.len() && sample_times[next] <= t_stop {
            let ts = sample_times[next];
            let ys = solver.fixed_step(step.t0, step.y0, ts - step.t0);
            samples.push((segments.len(), PhaseState::from_flow_vector(&ys, f, ts)));
            next += 1;
        }
        let e = model.energy(&y_stop[..f], &y_stop[f..2 * f]);
        drift = drift.max((e - energy).abs() / scale);
        match exit {
            None => {
                observer(step, g);
                Ok(Flow::Continue)
            }
            Some(b) => {
                let h = fd.exit_element(b).expect("bounded domain has exit elements");
                let end = PhaseState::from_flow_vector(&y_stop, f, t_stop);
                segments.push(Segment { start: seg_start.clone(), end });
                crossings.push(Crossing { time: t_stop, element: h, boundary: b });
                g = group.mul(g, h);
                let geo = group.geometric_of(h);
                let mut y_new = y_stop.clone();
                y_new[..f].copy_from_slice(&geo.apply_inverse(&y_stop[..f]));
                y_new[f..2 * f].copy_from_slice(&geo.apply_inverse(&y_stop[f..2 * f]));
                seg_start = PhaseState::from_flow_vector(&y_new, f, t_stop);
                Ok(Flow::Restart { t: t_stop, y: y_new })
            }
        }
    })?;
    let final_state = PhaseState::from_flow_vector(&y_final, f, t_end);
    segments.push(Segment { start: seg_start, end: final_state.clone() });
    Ok(FoldedTrajectory {
        segments,
        crossings,
        samples,
        accumulated_g: g,
        energy,
        energy_drift: drift,
        action: y_final[2 * f],
        final_state,
    })
}

/// Find the exit time inside an accepted step by Illinois iteration on the
/// boundary value of single re-steps; returns the offset and a state just
/// outside the boundary.
fn locate_crossing<F>(
    solver: &super::ode::Solver<F>,
    fd: &FundamentalDomain,
    b: Boundary,
    step: &Step,
    f: usize,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let value = |tau: f64| -> (f64, Vec<f64>) {
        let y = solver.fixed_step(step.t0, step.y0, tau);
        (fd.boundary_value(b, &y[..f]), y)
    };
    let (mut a, mut fa) = (0.0, fd.boundary_value(b, &step.y0[..f]));
    let (mut c, mut fc, mut yc) = (step.t1 - step.t0, fd.boundary_value(b, &step.y1[..f]), step.y1.to_vec());
    if fa <= 0.0 || fc > 0.0 {
        // entered and left through the same line within one step
        return Err(Error::BoundaryGrazing { time: step.t0 });
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if c - a < EVENT_TIME_TOL {
            break;
        }
        let mut m = (a * fc - c * fa) / (fc - fa);
        if !(m > a && m < c) {
            m = 0.5 * (a + c);
        }
        let (fm, ym) = value(m);
        if fm > 0.0 {
            a = m;
            fa = fm;
            if side == 1 {
                fc *= 0.5;
            }
            side = 1;
        } else {
            c = m;
            fc = fm;
            yc = ym;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    // normal velocity at the crossing
    let (fa2, _) = value(a);
    let speed = yc[f..2 * f].iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let rate = (fa2 - fd.boundary_value(b, &yc[..f])) / (c - a).max(1e-300);
    if c - a > 0.0 && rate.abs() < 1e-9 * speed {
        return Err(Error::BoundaryGrazing { time: step.t0 + c });
    }
    Ok((c, yc))
}

/// CSV with columns `t, q…, p…, segment_index, crossing_flags`; the flag is
/// 1 on the first sample after a crossing.
pub fn write_trajectory_csv<W: Write>(traj: &FoldedTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let f = traj.final_state.dof();
    let mut header = vec!["t".to_string()];
    header.extend((0..f).map(|i| format!("q{i}")));
    header.extend((0..f).map(|i| format!("p{i}")));
    header.push("segment_index".into());
    header.push("crossing_flags".into());
    w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut last_seg = 0usize;
    for (seg, s) in &traj.samples {
        let mut row = vec![format!("{:.12}", s.t)];
        row.extend(s.q.iter().chain(&s.p).map(|x| format!("{x:.12}")));
        row.push(seg.to_string());
        row.push(if *seg != last_seg { "1" } else { "0" }.into());
        last_seg = *seg;
        w.write_record(&row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

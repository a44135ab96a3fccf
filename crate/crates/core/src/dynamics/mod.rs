//! Classical flow of `H₀ = p²/2m + V(q)` and fundamental-domain folding.
//!
//! States are integrated as `[q, p, S]` where `S = ∫p·dq` is the action
//! accumulated since the start of the integration.

mod folding;
mod models;
pub mod ode;

pub use folding::{
    fold_state, integrate_folded, integrate_folded_observed, write_trajectory_csv, Boundary, Crossing,
    FoldedTrajectory, FundamentalDomain, Segment,
};
pub use models::{potential_and_gradient, Model, ModelFactory, ModelRegistry, ModelSpec, PlanarC3, ThreeDC3};
pub use ode::{Flow, OdeConfig, Solver, Step};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        Self { q, p, t }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite()) && self.t.is_finite()
    }

    /// `[q, p, 0]` layout used by the flow.
    pub fn to_flow_vector(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.dof() + 1);
        y.extend_from_slice(&self.q);
        y.extend_from_slice(&self.p);
        y.push(0.0);
        y
    }

    pub fn from_flow_vector(y: &[f64], f: usize, t: f64) -> Self {
        Self { q: y[..f].to_vec(), p: y[f..2 * f].to_vec(), t }
    }
}

/// Right-hand side of Hamilton's equations extended by `dS/dt = p²/m`.
pub fn hamilton_rhs(model: &dyn Model, y: &[f64], dy: &mut [f64]) {
    let f = model.dof();
    let m = model.mass();
    let mut p2 = 0.0;
    for i in 0..f {
        dy[i] = y[f + i] / m;
        p2 += y[f + i] * y[f + i];
    }
    model.gradient(&y[..f], &mut dy[f..2 * f]);
    for v in &mut dy[f..2 * f] {
        *v = -*v;
    }
    dy[2 * f] = p2 / m;
}

pub fn flow_solver(model: &dyn Model, config: OdeConfig) -> Solver<impl Fn(f64, &[f64], &mut [f64]) + '_> {
    Solver::new(move |_t, y: &[f64], dy: &mut [f64]| hamilton_rhs(model, y, dy), config)
}

/// Unfolded trajectory sampled at caller-chosen times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub final_state: PhaseState,
    pub action: f64,
    pub energy: f64,
    /// Largest relative energy deviation over accepted steps.
    pub energy_drift: f64,
}

/// Integrate the full-space flow over `[initial.t, initial.t + duration]`.
pub fn integrate_full(
    model: &dyn Model,
    initial: &PhaseState,
    duration: f64,
    config: OdeConfig,
    sample_times: &[f64],
) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be positive, got {duration}")));
    }
    if !initial.is_finite() {
        return Err(Error::InvalidParameter("initial state is not finite".into()));
    }
    let f = model.dof();
    let energy = model.energy(&initial.q, &initial.p);
    let scale = energy.abs().max(1e-300);
    let solver = flow_solver(model, config);
    let t0 = initial.t;
    let t_end = t0 + duration;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next = 0usize;
    let mut drift = 0.0f64;
    while next < sample_times.len() && sample_times[next] <= t0 {
        if sample_times[next] == t0 {
            samples.push(initial.clone());
        }
        next += 1;
    }
    let (_, y) = solver.run(t0, &initial.to_flow_vector(), t_end, |step| {
        while next < sample_times.len() && sample_times[next] <= step.t1 {
            let ts = sample_times[next];
            let ys = solver.fixed_step(step.t0, step.y0, ts - step.t0);
            samples.push(PhaseState::from_flow_vector(&ys, f, ts));
            next += 1;
        }
        let e = model.energy(&step.y1[..f], &step.y1[f..2 * f]);
        drift = drift.max((e - energy).abs() / scale);
        Ok(Flow::Continue)
    })?;
    Ok(Trajectory {
        samples,
        final_state: PhaseState::from_flow_vector(&y, f, t_end),
        action: y[2 * f],
        energy,
        energy_drift: drift,
    })
}

/// Radius along the unit direction `dir` at which `V` first exceeds `energy`,
/// starting from the origin; `None` if the ray does not leave `{V ≤ E}` within
/// `r_cap`.
pub fn allowed_radius(model: &dyn Model, dir: &[f64], energy: f64, r_cap: f64) -> Option<f64> {
    let at = |r: f64| -> f64 {
        let q: Vec<f64> = dir.iter().map(|d| d * r).collect();
        model.potential(&q) - energy
    };
    if at(0.0) > 0.0 {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while at(hi) <= 0.0 {
        lo = hi;
        hi += (0.02 * hi).max(1e-3);
        if hi > r_cap {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

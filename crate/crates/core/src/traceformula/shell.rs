//! Configuration-space integrals `I_a(E) = ∫_{V≤E} (E - V)^a dq` behind the
//! energy-shell volume `|Ω(E)| = C_f ∫ (E - V)^{(f-2)/2} dq` and the
//! phase-space volume `ω_f (2m)^{f/2} ∫ (E - V)^{f/2} dq`.
//!
//! Both integrators assume `{V ≤ E}` is star-shaped about the origin.

use crate::dynamics::{allowed_radius, Model};
use crate::error::{Error, Result};
use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::num::NonZeroUsize;
use std::sync::Arc;

/// Radius beyond which a ray is considered unbounded.
const RADIUS_CAP: f64 = 1e4;

/// `(E - V)^a` on the allowed region, with `a = 0` the indicator.
fn weight(excess: f64, exponent: f64) -> f64 {
    if excess < 0.0 {
        0.0
    } else if exponent == 0.0 {
        1.0
    } else {
        excess.powf(exponent)
    }
}

pub trait ShellIntegrator: Send + Sync + Debug {
    fn name(&self) -> &str;

    /// `I_a(E)` with a standard-error estimate for each energy.
    fn configuration_integrals(&self, model: &dyn Model, energies: &[f64], exponent: f64) -> Result<Vec<(f64, f64)>>;
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the Monte Carlo box; chosen from the allowed region if absent.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default = "default_angular")]
    pub angular: usize,
    #[serde(default = "default_radial")]
    pub radial: usize,
}

fn default_method() -> String {
    "monte_carlo".into()
}
fn default_samples() -> usize {
    1_000_000
}
fn default_angular() -> usize {
    256
}
fn default_radial() -> usize {
    48
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            method: default_method(),
            samples: default_samples(),
            seed: 0,
            half_width: None,
            angular: default_angular(),
            radial: default_radial(),
        }
    }
}

/// Uniform sampling of a cube `[-L, L]^f`, with common samples across energies.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    pub half_width: Option<f64>,
}

const CHUNK: usize = 1 << 15;

fn directions(f: usize, n: usize) -> Vec<Vec<f64>> {
    match f {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n).map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect(),
        _ => {
            // Fibonacci sphere
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
    }
}

impl MonteCarlo {
    fn box_half_width(&self, model: &dyn Model, e_max: f64) -> Result<f64> {
        if let Some(l) = self.half_width {
            return Ok(l);
        }
        let f = model.dof();
        let mut r_max = 0.0f64;
        for dir in directions(f, 2048) {
            let r = allowed_radius(model, &dir, e_max, RADIUS_CAP).ok_or(Error::BoundingBox)?;
            r_max = r_max.max(r);
        }
        Ok(1.2 * r_max.max(1e-12))
    }

    /// The box faces must lie outside `{V ≤ E}`.
    fn check_box(&self, model: &dyn Model, half_width: f64, e_max: f64) -> Result<()> {
        let f = model.dof();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        for _ in 0..4096 {
            let mut q: Vec<f64> = (0..f).map(|_| rng.gen_range(-half_width..half_width)).collect();
            let axis = rng.gen_range(0..f);
            q[axis] = if rng.gen::<bool>() { half_width } else { -half_width };
            if model.potential(&q) <= e_max {
                return Err(Error::BoundingBox);
            }
        }
        Ok(())
    }
}

impl ShellIntegrator for MonteCarlo {
    fn name(&self) -> &str {
        "monte_carlo"
    }

    fn configuration_integrals(&self, model: &dyn Model, energies: &[f64], exponent: f64) -> Result<Vec<(f64, f64)>> {
        if self.samples < 2 {
            return Err(Error::InvalidParameter("Monte Carlo needs at least two samples".into()));
        }
        let e_max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f = model.dof();
        let l = self.box_half_width(model, e_max)?;
        self.check_box(model, l, e_max)?;
        let volume = (2.0 * l).powi(f as i32);
        let chunks = self.samples.div_ceil(CHUNK);
        let potentials: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(c as u64);
                let n = CHUNK.min(self.samples - c * CHUNK);
                let mut q = vec![0.0; f];
                (0..n)
                    .map(|_| {
                        q.iter_mut().for_each(|x| *x = rng.gen_range(-l..l));
                        model.potential(&q)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let n = potentials.len() as f64;
        Ok(energies
            .par_iter()
            .map(|&e| {
                let (mut s1, mut s2) = (0.0, 0.0);
                for v in &potentials {
                    let w = weight(e - v, exponent);
                    s1 += w;
                    s2 += w * w;
                }
                let mean = s1 / n;
                let var = (s2 / n - mean * mean).max(0.0) / (n - 1.0);
                (volume * mean, volume * var.sqrt())
            })
            .collect())
    }
}

/// Polar quadrature: trapezoid in the azimuth, Gauss-Legendre in the polar
/// cosine (3D) and in the radius after `r = R(1 - s²)`, which removes the
/// square-root edge of `(E - V)^a`. The error estimate is the change under
/// halving the angular resolution.
#[derive(Debug, Clone)]
pub struct PolarQuadrature {
    pub angular: usize,
    pub radial: usize,
}

impl PolarQuadrature {
    fn integrate(&self, model: &dyn Model, energy: f64, exponent: f64, angular: usize) -> Result<f64> {
        let f = model.dof();
        let radial = GaussLegendre::new(NonZeroUsize::new(self.radial.max(2)).unwrap());
        let ray = |dir: &[f64]| -> Result<f64> {
            let r_edge = allowed_radius(model, dir, energy, RADIUS_CAP).ok_or(Error::BoundingBox)?;
            let mut q = vec![0.0; f];
            Ok(radial.integrate(0.0, 1.0, |s| {
                let r = r_edge * (1.0 - s * s);
                q.iter_mut().zip(dir).for_each(|(x, d)| *x = d * r);
                weight(energy - model.potential(&q), exponent) * r.powi(f as i32 - 1) * 2.0 * r_edge * s
            }))
        };
        match f {
            1 => Ok(ray(&[1.0])? + ray(&[-1.0])?),
            2 => {
                let n = angular.max(4);
                let sum: Result<Vec<f64>> = (0..n)
                    .into_par_iter()
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        ray(&[t.cos(), t.sin()])
                    })
                    .collect();
                Ok(sum?.iter().sum::<f64>() * 2.0 * PI / n as f64)
            }
            3 => {
                let n = angular.max(4);
                let polar = GaussLegendre::new(NonZeroUsize::new(n / 2).unwrap());
                let nodes: Vec<(f64, f64)> = polar.as_node_weight_pairs().to_vec();
                let sum: Result<Vec<f64>> = nodes
                    .par_iter()
                    .map(|&(u, w)| {
                        let st = (1.0 - u * u).sqrt();
                        let mut acc = 0.0;
                        for k in 0..n {
                            let phi = 2.0 * PI * k as f64 / n as f64;
                            acc += ray(&[st * phi.cos(), st * phi.sin(), u])?;
                        }
                        Ok(w * acc * 2.0 * PI / n as f64)
                    })
                    .collect();
                Ok(sum?.iter().sum())
            }
            _ => Err(Error::InvalidParameter(format!("polar quadrature supports f ≤ 3, got {f}"))),
        }
    }
}

impl ShellIntegrator for PolarQuadrature {
    fn name(&self) -> &str {
        "polar_quadrature"
    }

    fn configuration_integrals(&self, model: &dyn Model, energies: &[f64], exponent: f64) -> Result<Vec<(f64, f64)>> {
        energies
            .iter()
            .map(|&e| {
                let fine = self.integrate(model, e, exponent, self.angular)?;
                let coarse = self.integrate(model, e, exponent, self.angular / 2)?;
                Ok((fine, (fine - coarse).abs()))
            })
            .collect()
    }
}

pub type IntegratorFactory = Arc<dyn Fn(&IntegratorSpec) -> Result<Arc<dyn ShellIntegrator>> + Send + Sync>;

/// Shell-volume integrators selectable by `IntegratorSpec::method`.
#[derive(Clone)]
pub struct ShellIntegratorRegistry {
    factories: BTreeMap<String, IntegratorFactory>,
}

impl Default for ShellIntegratorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ShellIntegratorRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("monte_carlo", |s| {
            Ok(Arc::new(MonteCarlo { samples: s.samples, seed: s.seed, half_width: s.half_width })
                as Arc<dyn ShellIntegrator>)
        });
        r.register("polar_quadrature", |s| {
            Ok(Arc::new(PolarQuadrature { angular: s.angular, radial: s.radial }) as Arc<dyn ShellIntegrator>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&IntegratorSpec) -> Result<Arc<dyn ShellIntegrator>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, spec: &IntegratorSpec) -> Result<Arc<dyn ShellIntegrator>> {
        let factory = self
            .factories
            .get(&spec.method)
            .ok_or_else(|| Error::UnknownStrategy { kind: "shell integrator", name: spec.method.clone() })?;
        factory(spec)
    }
}

/// Volume of the unit ball in `f` dimensions.
pub fn unit_ball_volume(f: usize) -> f64 {
    match f {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(f as f64 / 2.0) / gamma_half_integer(f + 2),
    }
}

/// `Γ(n/2)` for positive integers `n`.
fn gamma_half_integer(n: usize) -> f64 {
    let mut x = n as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        acc * PI.sqrt()
    } else {
        acc
    }
}

/// `C_f = (f/2) ω_f (2m)^{f/2}`, so that `|Ω| = C_f I_{(f-2)/2}`.
pub fn shell_constant(f: usize, mass: f64) -> f64 {
    0.5 * f as f64 * unit_ball_volume(f) * (2.0 * mass).powf(f as f64 / 2.0)
}

/// `|Ω(E)|` with its standard error.
pub fn energy_shell_volume(model: &dyn Model, integrator: &dyn ShellIntegrator, energy: f64) -> Result<(f64, f64)> {
    let f = model.dof();
    let (i, err) = integrator.configuration_integrals(model, &[energy], (f as f64 - 2.0) / 2.0)?[0];
    let c = shell_constant(f, model.mass());
    Ok((c * i, c * err))
}

/// Phase-space volume of `{H ≤ E}` with its standard error.
pub fn phase_space_volume(model: &dyn Model, integrator: &dyn ShellIntegrator, energy: f64) -> Result<(f64, f64)> {
    let f = model.dof();
    let (i, err) = integrator.configuration_integrals(model, &[energy], f as f64 / 2.0)?[0];
    let c = unit_ball_volume(f) * (2.0 * model.mass()).powf(f as f64 / 2.0);
    Ok((c * i, c * err))
}

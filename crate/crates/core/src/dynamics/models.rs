use crate::error::{Error, Result};
use crate::grouprep::GroupSpec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

/// Scenario-level model description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default = "one")]
    pub mass: f64,
    /// Strength of the cubic `x²y - y³/3` term.
    #[serde(default = "one")]
    pub lambda: f64,
    /// Coefficient of `r⁶ sin 6θ`, which removes the mirror planes.
    #[serde(default)]
    pub epsilon: f64,
    /// `z²(x²+y²)` coupling of the three-dimensional family.
    #[serde(default)]
    pub mu: f64,
    /// Coefficient of the confining `r⁴` term.
    #[serde(default)]
    pub quartic: f64,
    /// Spin-orbit coupling `κ` in `C = κ ∇V × p`.
    #[serde(default)]
    pub kappa: f64,
    pub hbar_eff: f64,
    /// Free parameters for user-registered families.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.hbar_eff > 0.0 && self.hbar_eff.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar_eff must be positive, got {}", self.hbar_eff)));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
            ("mu", self.mu),
            ("quartic", self.quartic),
            ("kappa", self.kappa),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.quartic < 0.0 {
            return Err(Error::InvalidParameter("quartic must be non-negative".into()));
        }
        Ok(())
    }
}

/// A Hamiltonian `p²/2m + V(q)` with spin coupling `(1/2) S·C(q, p)`.
pub trait Model: Send + Sync + Debug {
    fn family(&self) -> &str;
    fn dof(&self) -> usize;
    fn mass(&self) -> f64;
    fn kappa(&self) -> f64;
    fn hbar_eff(&self) -> f64;
    fn potential(&self, q: &[f64]) -> f64;
    fn gradient(&self, q: &[f64], out: &mut [f64]);
    fn hessian(&self, q: &[f64]) -> DMatrix<f64>;
    /// Largest point group leaving `V` and `C` invariant.
    fn symmetry(&self) -> GroupSpec;

    /// Classical spin-coupling vector; `κ ∇V × p` with planar vectors
    /// embedded at `z = 0`.
    fn coupling(&self, q: &[f64], p: &[f64]) -> [f64; 3] {
        let f = self.dof();
        let mut g = [0.0; 3];
        self.gradient(q, &mut g[..f]);
        let mut pv = [0.0; 3];
        pv[..f].copy_from_slice(&p[..f]);
        let k = self.kappa();
        [
            k * (g[1] * pv[2] - g[2] * pv[1]),
            k * (g[2] * pv[0] - g[0] * pv[2]),
            k * (g[0] * pv[1] - g[1] * pv[0]),
        ]
    }

    fn energy(&self, q: &[f64], p: &[f64]) -> f64 {
        let p2: f64 = p.iter().map(|x| x * x).sum();
        p2 / (2.0 * self.mass()) + self.potential(q)
    }
}

/// `(V, ∇V, Hessian)` at `q`.
pub fn potential_and_gradient(model: &dyn Model, q: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
    let mut g = vec![0.0; model.dof()];
    model.gradient(q, &mut g);
    (model.potential(q), g, model.hessian(q))
}

/// `½r² + λ(x²y - y³/3) + μ₄ r⁴ + ε r⁶ sin 6θ`.
#[derive(Debug, Clone)]
pub struct PlanarC3 {
    pub spec: ModelSpec,
}

impl Model for PlanarC3 {
    fn family(&self) -> &str {
        "planar_c3"
    }
    fn dof(&self) -> usize {
        2
    }
    fn mass(&self) -> f64 {
        self.spec.mass
    }
    fn kappa(&self) -> f64 {
        self.spec.kappa
    }
    fn hbar_eff(&self) -> f64 {
        self.spec.hbar_eff
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let (x, y) = (q[0], q[1]);
        let r2 = x * x + y * y;
        let s = &self.spec;
        let im_z6 = 6.0 * x.powi(5) * y - 20.0 * x.powi(3) * y.powi(3) + 6.0 * x * y.powi(5);
        0.5 * r2 + s.lambda * (x * x * y - y.powi(3) / 3.0) + s.quartic * r2 * r2 + s.epsilon * im_z6
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let (x, y) = (q[0], q[1]);
        let r2 = x * x + y * y;
        let s = &self.spec;
        let (x2, y2) = (x * x, y * y);
        out[0] = x
            + 2.0 * s.lambda * x * y
            + 4.0 * s.quartic * x * r2
            + s.epsilon * (30.0 * x2 * x2 * y - 60.0 * x2 * y2 * y + 6.0 * y2 * y2 * y);
        out[1] = y
            + s.lambda * (x2 - y2)
            + 4.0 * s.quartic * y * r2
            + s.epsilon * (6.0 * x2 * x2 * x - 60.0 * x2 * x * y2 + 30.0 * x * y2 * y2);
    }

    fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let (x, y) = (q[0], q[1]);
        let (x2, y2) = (x * x, y * y);
        let r2 = x2 + y2;
        let s = &self.spec;
        let e = s.epsilon;
        let xx = 1.0 + 2.0 * s.lambda * y + 4.0 * s.quartic * (r2 + 2.0 * x2) + e * (120.0 * x2 * x * y - 120.0 * x * y2 * y);
        let xy = 2.0 * s.lambda * x + 8.0 * s.quartic * x * y + e * (30.0 * x2 * x2 - 180.0 * x2 * y2 + 30.0 * y2 * y2);
        let yy = 1.0 - 2.0 * s.lambda * y + 4.0 * s.quartic * (r2 + 2.0 * y2) - e * (120.0 * x2 * x * y - 120.0 * x * y2 * y);
        DMatrix::from_row_slice(2, 2, &[xx, xy, xy, yy])
    }

    fn symmetry(&self) -> GroupSpec {
        c3_symmetry(self.spec.epsilon)
    }
}

fn c3_symmetry(epsilon: f64) -> GroupSpec {
    let axis = [0.0, 0.0, 1.0];
    if epsilon == 0.0 {
        // the cubic term is even in x
        GroupSpec::Cnv { n: 3, axis, mirror_normal: [1.0, 0.0, 0.0] }
    } else {
        GroupSpec::Cn { n: 3, axis }
    }
}

/// `½|q|² + λ(x²y - y³/3) + μ z²(x²+y²) + μ₄ |q|⁴`.
#[derive(Debug, Clone)]
pub struct ThreeDC3 {
    pub spec: ModelSpec,
}

impl Model for ThreeDC3 {
    fn family(&self) -> &str {
        "threed_c3"
    }
    fn dof(&self) -> usize {
        3
    }
    fn mass(&self) -> f64 {
        self.spec.mass
    }
    fn kappa(&self) -> f64 {
        self.spec.kappa
    }
    fn hbar_eff(&self) -> f64 {
        self.spec.hbar_eff
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let (x, y, z) = (q[0], q[1], q[2]);
        let rho2 = x * x + y * y;
        let r2 = rho2 + z * z;
        let s = &self.spec;
        0.5 * r2 + s.lambda * (x * x * y - y.powi(3) / 3.0) + s.mu * z * z * rho2 + s.quartic * r2 * r2
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let (x, y, z) = (q[0], q[1], q[2]);
        let rho2 = x * x + y * y;
        let r2 = rho2 + z * z;
        let s = &self.spec;
        out[0] = x + 2.0 * s.lambda * x * y + 2.0 * s.mu * z * z * x + 4.0 * s.quartic * x * r2;
        out[1] = y + s.lambda * (x * x - y * y) + 2.0 * s.mu * z * z * y + 4.0 * s.quartic * y * r2;
        out[2] = z + 2.0 * s.mu * z * rho2 + 4.0 * s.quartic * z * r2;
    }

    fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let (x, y, z) = (q[0], q[1], q[2]);
        let rho2 = x * x + y * y;
        let r2 = rho2 + z * z;
        let s = &self.spec;
        let (l, m, k) = (s.lambda, s.mu, s.quartic);
        let xx = 1.0 + 2.0 * l * y + 2.0 * m * z * z + 4.0 * k * (r2 + 2.0 * x * x);
        let xy = 2.0 * l * x + 8.0 * k * x * y;
        let xz = 4.0 * m * x * z + 8.0 * k * x * z;
        let yy = 1.0 - 2.0 * l * y + 2.0 * m * z * z + 4.0 * k * (r2 + 2.0 * y * y);
        let yz = 4.0 * m * y * z + 8.0 * k * y * z;
        let zz = 1.0 + 2.0 * m * rho2 + 4.0 * k * (r2 + 2.0 * z * z);
        DMatrix::from_row_slice(3, 3, &[xx, xy, xz, xy, yy, yz, xz, yz, zz])
    }

    fn symmetry(&self) -> GroupSpec {
        c3_symmetry(0.0)
    }
}

pub type ModelFactory = Arc<dyn Fn(&ModelSpec) -> Result<Arc<dyn Model>> + Send + Sync>;

/// Model families selectable by `ModelSpec::family`.
#[derive(Clone)]
pub struct ModelRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("planar_c3", |spec| Ok(Arc::new(PlanarC3 { spec: spec.clone() }) as Arc<dyn Model>));
        r.register("threed_c3", |spec| Ok(Arc::new(ThreeDC3 { spec: spec.clone() }) as Arc<dyn Model>));
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ModelSpec) -> Result<Arc<dyn Model>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Arc<dyn Model>> {
        spec.validate()?;
        let factory = self
            .factories
            .get(&spec.family)
            .ok_or_else(|| Error::UnknownStrategy { kind: "model", name: spec.family.clone() })?;
        factory(spec)
    }
}

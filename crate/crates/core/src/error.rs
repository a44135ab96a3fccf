use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("generator {index} is not orthogonal (|RᵀR - 1| = {residual:.3e})")]
    NonOrthogonalGenerator { index: usize, residual: f64 },

    #[error("group closure not reached within {cap} elements")]
    ClosureNotReached { cap: usize },

    #[error("inconsistent double-group lift: {0}")]
    InconsistentLift(String),

    #[error("character table construction failed after {attempts} attempts: {reason}")]
    CharacterTable { attempts: usize, reason: String },

    #[error("irrep {irrep} is standard (κ = +1); its projector vanishes on the spinor space")]
    VanishingProjector { irrep: String },

    #[error("corrupted irrep {irrep}: κ = {kappa} is not ±1")]
    CorruptedIrrep { irrep: String, kappa: f64 },

    #[error("axis is not a unit vector (|n| = {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("spin-part coefficients are not unitary (a0² + |a|² = {norm_sq})")]
    NonUnitarySpinPart { norm_sq: f64 },

    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("persistent tangential grazing of the fundamental-domain boundary at t = {time}")]
    BoundaryGrazing { time: f64 },

    #[error("initial point is not inside the fundamental domain")]
    OutsideFundamentalDomain,

    #[error("unknown {kind} '{name}'")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bounding box does not contain the classically allowed region")]
    BoundingBox,

    #[error("pseudo-orbit count exceeds cap {cap}")]
    PseudoOrbitBlowup { cap: usize },

    #[error("basis too small: {0}")]
    BasisTooSmall(String),

    #[error("insufficient spectral range: spectrum ends at {available}, need {required}")]
    InsufficientRange { available: f64, required: f64 },

    #[error("numerical check failed: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

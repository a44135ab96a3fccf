//! Symmetry- and spin-resolved semiclassics for Pauli-type Hamiltonians.
//!
//! The crate is organised bottom-up:
//!
//! * [`grouprep`] builds point groups, their double groups, character tables,
//!   Frobenius-Schur indicators, projectors and intertwiners.
//! * [`spinalg`] holds spin-S matrices, rotation lifts and time reversal.
//! * [`dynamics`] integrates the classical flow of the built-in models and
//!   folds trajectories into a fundamental domain.
//! * [`spintransport`] propagates the spin precession matrix along trajectories.
//! * [`orbits`] searches periodic orbits of the folded dynamics and decorates
//!   them with stability data, group elements and spin factors.
//! * [`traceformula`] assembles per-irrep level densities.
//! * [`specdet`] evaluates pseudo-orbit expansions of spectral determinants.
//! * [`quantumref`] diagonalises the planar model exactly for cross-checks.
//!
//! Models, shell-volume integrators and determinant variants are strategies
//! registered by name; see [`dynamics::ModelRegistry`],
//! [`traceformula::ShellIntegratorRegistry`] and [`specdet::VariantRegistry`].

pub mod dynamics;
pub mod error;
pub mod grouprep;
pub mod linalg;
pub mod orbits;
pub mod quantumref;
pub mod specdet;
pub mod spinalg;
pub mod spintransport;
pub mod traceformula;

pub use error::{Error, Result};
pub use num_complex::Complex64;

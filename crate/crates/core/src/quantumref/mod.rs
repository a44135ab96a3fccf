//! Exact diagonalisation of the planar model for cross-checks.
//!
//! The Pauli Hamiltonian `H = H₀ + (ħ/2) m_s C_z` is represented in the
//! circular oscillator basis `|n_R, n_L⟩ ⊗ |m_s⟩` truncated to shells
//! `n_R + n_L ≤ N`. Rotations about z act diagonally as `e^{-iθ(l + m_s)}`
//! with `l = n_R - n_L`, so irrep projection of an abelian symmetry group is
//! exact sector selection. The C3-symmetric potential couples `l → l ± 3`
//! only, which splits `H` into blocks labelled by `(m_s, l mod 3)`.

pub mod fourier;
pub mod operators;

use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::grouprep::{full_projector, FiniteGroup, Irrep};
use crate::linalg::{self, CMatrix};
use crate::traceformula::DensityGrid;
use faer::{Mat, Side};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use operators::{add_scaled, apply, basis_ket, normalize, Ket, Poly, Scales};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Largest `‖H - H†‖` accepted at construction.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Largest `‖[H, U(g)]‖` accepted for the symmetry group.
pub const COMMUTATION_TOL: f64 = 1e-10;
/// Requested energies must stay this fraction below the basis ceiling.
pub const CEILING_MARGIN: f64 = 0.05;

/// Circular oscillator basis of frequency `omega` with shells `0..=shells`,
/// tensored with spin `two_s / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumBasis {
    pub shells: usize,
    pub omega: f64,
    pub two_s: u32,
}

impl QuantumBasis {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("basis frequency must be positive, got {}", self.omega)));
        }
        if self.shells == 0 {
            return Err(Error::InvalidParameter("basis needs at least one shell".into()));
        }
        Ok(())
    }

    /// Number of orbital states `(N+1)(N+2)/2`.
    pub fn orbital_dim(&self) -> usize {
        (self.shells + 1) * (self.shells + 2) / 2
    }

    pub fn spin_dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// `(n_R, n_L)` ordered by shell, then by `n_L`.
    pub fn occupations(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.orbital_dim());
        for n in 0..=self.shells as u32 {
            for nl in 0..=n {
                out.push((n - nl, nl));
            }
        }
        out
    }

    /// Position of `(n_R, n_L)` in [`Self::occupations`], if retained.
    pub fn index(&self, nr: u32, nl: u32) -> Option<usize> {
        let n = (nr + nl) as usize;
        (n <= self.shells).then(|| n * (n + 1) / 2 + nl as usize)
    }

    /// `m_s` of spin index `k`, ordered `S, S-1, ..., -S`.
    pub fn spin_projection(&self, k: usize) -> f64 {
        self.two_s as f64 / 2.0 - k as f64
    }
}

/// `V(x, y)` of the planar family as a polynomial.
pub fn planar_potential(spec: &ModelSpec) -> Result<Poly> {
    if spec.family != "planar_c3" {
        return Err(Error::InvalidParameter(format!(
            "quantum reference supports the planar_c3 family only, got '{}'",
            spec.family
        )));
    }
    let (l, q, e) = (spec.lambda, spec.quartic, spec.epsilon);
    let terms = vec![
        (0.5, 2, 0),
        (0.5, 0, 2),
        (l, 2, 1),
        (-l / 3.0, 0, 3),
        (q, 4, 0),
        (2.0 * q, 2, 2),
        (q, 0, 4),
        (6.0 * e, 5, 1),
        (-20.0 * e, 3, 3),
        (6.0 * e, 1, 5),
    ];
    Ok(Poly(terms.into_iter().filter(|t| t.0 != 0.0).collect()))
}

/// Sparse column storage: `columns[j]` lists `(i, H_ij)` sorted by `i`.
type Columns = Vec<Vec<(usize, Complex64)>>;

/// Orbital operators `H₀` and `C_z` of the planar Pauli Hamiltonian.
#[derive(Debug, Clone)]
pub struct PlanarHamiltonian {
    pub basis: QuantumBasis,
    pub model: ModelSpec,
    /// `l = n_R - n_L` per orbital state.
    pub l: Vec<i32>,
    h0: Columns,
    cz: Columns,
}

/// Build `H₀ = p²/2m + V` and the Weyl-ordered coupling
/// `C_z = (κ/2)[(∂ₓV p_y + p_y ∂ₓV) - (∂ᵧV p_x + p_x ∂ᵧV)]`.
///
/// Matrix elements are exact within the retained shells; Hermiticity is
/// asserted to [`HERMITICITY_TOL`].
pub fn build_hamiltonian(spec: &ModelSpec, basis: QuantumBasis) -> Result<PlanarHamiltonian> {
    spec.validate()?;
    basis.validate()?;
    let v = planar_potential(spec)?;
    let (dxv, dyv) = (v.dx(), v.dy());
    let m = spec.mass;
    let sc = Scales::new(m, basis.omega, spec.hbar_eff);
    let (px, py) = (sc.px(), sc.py());
    let occ = basis.occupations();
    let half_kappa = Complex64::new(spec.kappa / 2.0, 0.0);
    let to_column = |ket: Ket| -> Vec<(usize, Complex64)> {
        ket.into_iter()
            .filter(|e| e.1 != Complex64::new(0.0, 0.0))
            .filter_map(|((nr, nl), z)| basis.index(nr, nl).map(|i| (i, z)))
            .collect()
    };
    let columns: Vec<(Vec<(usize, Complex64)>, Vec<(usize, Complex64)>)> = occ
        .par_iter()
        .map(|&(nr, nl)| {
            let k = basis_ket(nr, nl);
            let pxk = apply(&px, &k);
            let pyk = apply(&py, &k);
            let mut h: Ket = Vec::new();
            add_scaled(&mut h, &apply(&px, &pxk), Complex64::new(0.5 / m, 0.0));
            add_scaled(&mut h, &apply(&py, &pyk), Complex64::new(0.5 / m, 0.0));
            add_scaled(&mut h, &v.apply(&sc, &k), Complex64::new(1.0, 0.0));
            let mut c: Ket = Vec::new();
            if spec.kappa != 0.0 {
                add_scaled(&mut c, &dxv.apply(&sc, &pyk), half_kappa);
                add_scaled(&mut c, &apply(&py, &dxv.apply(&sc, &k)), half_kappa);
                add_scaled(&mut c, &dyv.apply(&sc, &pxk), -half_kappa);
                add_scaled(&mut c, &apply(&px, &dyv.apply(&sc, &k)), -half_kappa);
            }
            let mut hc = to_column(normalize(h));
            let mut cc = to_column(normalize(c));
            hc.sort_by_key(|e| e.0);
            cc.sort_by_key(|e| e.0);
            (hc, cc)
        })
        .collect();
    let (h0, cz): (Columns, Columns) = columns.into_iter().unzip();
    let l = occ.iter().map(|&(nr, nl)| nr as i32 - nl as i32).collect();
    let ham = PlanarHamiltonian { basis, model: spec.clone(), l, h0, cz };
    let defect = ham.hermiticity_defect();
    if defect > HERMITICITY_TOL {
        return Err(Error::Tolerance(format!("‖H - H†‖ = {defect:.3e} exceeds {HERMITICITY_TOL:.0e}")));
    }
    Ok(ham)
}

fn lookup(col: &[(usize, Complex64)], i: usize) -> Complex64 {
    col.binary_search_by_key(&i, |e| e.0).map(|k| col[k].1).unwrap_or_default()
}

impl PlanarHamiltonian {
    pub fn hbar(&self) -> f64 {
        self.model.hbar_eff
    }

    /// Coefficient of `C_z` in the `m_s` sector.
    pub fn coupling_scale(&self, k: usize) -> f64 {
        self.hbar() / 2.0 * self.basis.spin_projection(k)
    }

    /// `max |H_ij - conj(H_ji)|` over both orbital operators.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for cols in [&self.h0, &self.cz] {
            for (j, col) in cols.iter().enumerate() {
                for &(i, z) in col {
                    worst = worst.max((z - lookup(&cols[i], j).conj()).norm());
                }
            }
        }
        worst
    }

    /// `max |[H, U(g)]_ij|` over all group elements; `U` is diagonal so the
    /// commutator entry is `H_ij (u_j - u_i)`.
    pub fn commutation_defect(&self, action: &RotationAction) -> f64 {
        let mut worst: f64 = 0.0;
        for g in 0..action.angles.len() {
            let phase: Vec<Complex64> = self.l.iter().map(|&l| Complex64::from_polar(1.0, -action.angles[g] * l as f64)).collect();
            for cols in [&self.h0, &self.cz] {
                for (j, col) in cols.iter().enumerate() {
                    for &(i, z) in col {
                        worst = worst.max((z * (phase[j] - phase[i])).norm());
                    }
                }
            }
        }
        worst
    }

    /// Orbital states with `l ≡ residue (mod 3)`.
    pub fn block_states(&self, residue: i32) -> Vec<usize> {
        (0..self.l.len()).filter(|&i| self.l[i].rem_euclid(3) == residue).collect()
    }

    /// All eigenvalues of the `(m_s index k, l mod 3)` block.
    ///
    /// The phase change `|l⟩ → i^l |l⟩` renders the block real symmetric when
    /// the potential has a mirror line; the real solver is used whenever the
    /// transformed block is real to rounding.
    pub fn block_eigenvalues(&self, k: usize, residue: i32) -> Result<Vec<f64>> {
        let states = self.block_states(residue);
        let n = states.len();
        let mut pos = vec![usize::MAX; self.l.len()];
        for (a, &i) in states.iter().enumerate() {
            pos[i] = a;
        }
        let scale = Complex64::new(self.coupling_scale(k), 0.0);
        let mut dense = vec![Complex64::new(0.0, 0.0); n * n];
        let mut scale_max: f64 = 0.0;
        let mut imag_max: f64 = 0.0;
        for (b, &j) in states.iter().enumerate() {
            for (cols, s) in [(&self.h0, Complex64::new(1.0, 0.0)), (&self.cz, scale)] {
                for &(i, z) in &cols[j] {
                    let a = pos[i];
                    if a == usize::MAX {
                        continue;
                    }
                    dense[a * n + b] += z * s;
                }
            }
        }
        for (b, &j) in states.iter().enumerate() {
            for (a, &i) in states.iter().enumerate() {
                let z = &mut dense[a * n + b];
                if *z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                *z *= Complex64::i().powi((self.l[j] - self.l[i]).rem_euclid(4));
                scale_max = scale_max.max(z.norm());
                imag_max = imag_max.max(z.im.abs());
            }
        }
        let eig = if imag_max <= 1e-14 * scale_max.max(1.0) {
            let m = Mat::<f64>::from_fn(n, n, |a, b| dense[a * n + b].re);
            m.self_adjoint_eigenvalues(Side::Lower)
        } else {
            let m = Mat::<Complex64>::from_fn(n, n, |a, b| dense[a * n + b]);
            m.self_adjoint_eigenvalues(Side::Lower)
        };
        let mut ev = eig.map_err(|e| Error::Tolerance(format!("eigensolver failed: {e:?}")))?;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Dense `H` on the full orbital ⊗ spin space, index `k·D + i`.
    /// Intended for small bases only.
    pub fn dense(&self) -> CMatrix {
        let d = self.l.len();
        let ns = self.basis.spin_dim();
        let mut h = CMatrix::zeros(d * ns, d * ns);
        for k in 0..ns {
            let s = self.coupling_scale(k);
            for j in 0..d {
                for &(i, z) in &self.h0[j] {
                    h[(k * d + i, k * d + j)] += z;
                }
                for &(i, z) in &self.cz[j] {
                    h[(k * d + i, k * d + j)] += z * s;
                }
            }
        }
        h
    }
}

/// Diagonal action of the group on the basis: element `g` multiplies
/// `|l, m_s⟩` by `e^{-iθ_g l} · [U_sp(g)]_{m_s m_s}`.
#[derive(Debug, Clone)]
pub struct RotationAction {
    pub angles: Vec<f64>,
    pub spin_diagonal: Vec<Vec<Complex64>>,
}

impl RotationAction {
    /// Requires every element to be a proper rotation about z with a diagonal
    /// spin lift, and every angle compatible with the `l mod 3` blocks.
    pub fn new(group: &FiniteGroup, basis: &QuantumBasis) -> Result<Self> {
        if group.two_s != basis.two_s {
            return Err(Error::InvalidParameter(format!(
                "group built for 2S = {} but basis has 2S = {}",
                group.two_s, basis.two_s
            )));
        }
        let mut angles = Vec::with_capacity(group.order());
        let mut spin_diagonal = Vec::with_capacity(group.order());
        for (g, el) in group.elements.iter().enumerate() {
            let geo = group.geometric_of(g);
            let r = &geo.matrix;
            let about_z = geo.proper
                && (r[(2, 2)] - 1.0).abs() < 1e-12
                && r[(0, 2)].abs() < 1e-12
                && r[(1, 2)].abs() < 1e-12;
            if !about_z {
                return Err(Error::InvalidParameter(format!(
                    "quantum reference needs rotations about z only; element {} is not one",
                    el.label
                )));
            }
            let theta = r[(1, 0)].atan2(r[(0, 0)]);
            if (Complex64::from_polar(1.0, 3.0 * theta) - 1.0).norm() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "rotation {} does not preserve the l mod 3 blocks",
                    el.label
                )));
            }
            let lift = &el.spin_lift;
            let off: f64 = (0..lift.nrows())
                .flat_map(|a| (0..lift.ncols()).map(move |b| (a, b)))
                .filter(|(a, b)| a != b)
                .map(|(a, b)| lift[(a, b)].norm())
                .fold(0.0, f64::max);
            if off > 1e-12 {
                return Err(Error::InvalidParameter(format!("spin lift of {} is not diagonal", el.label)));
            }
            angles.push(theta);
            spin_diagonal.push(lift.diagonal().iter().copied().collect());
        }
        Ok(Self { angles, spin_diagonal })
    }

    /// Eigenvalue of `U(g)` on the block `(k, l mod 3 = residue)`.
    pub fn block_eigenvalue(&self, g: usize, k: usize, residue: i32) -> Complex64 {
        Complex64::from_polar(1.0, -self.angles[g] * residue as f64) * self.spin_diagonal[g][k]
    }

    /// Dense diagonal `U(g)` on the orbital ⊗ spin space of `ham`.
    pub fn matrix(&self, g: usize, ham: &PlanarHamiltonian) -> CMatrix {
        let d = ham.l.len();
        let ns = ham.basis.spin_dim();
        let mut u = CMatrix::zeros(d * ns, d * ns);
        for k in 0..ns {
            for (i, &l) in ham.l.iter().enumerate() {
                u[(k * d + i, k * d + i)] = Complex64::from_polar(1.0, -self.angles[g] * l as f64) * self.spin_diagonal[g][k];
            }
        }
        u
    }
}

/// `(m_s index, l mod 3)` blocks on which `U(g) = χ_α(g)` for all `g`.
pub fn sector_blocks(group: &FiniteGroup, irrep: &Irrep, action: &RotationAction) -> Result<Vec<(usize, i32)>> {
    if group.is_double && !irrep.is_extra() {
        return Err(Error::VanishingProjector { irrep: irrep.label.clone() });
    }
    if irrep.dimension != 1 {
        return Err(Error::InvalidParameter(format!(
            "irrep {} has dimension {}; sector selection needs an abelian group",
            irrep.label, irrep.dimension
        )));
    }
    let ns = action.spin_diagonal[0].len();
    let mut out = Vec::new();
    for k in 0..ns {
        for residue in 0..3 {
            let matches = (0..group.order()).all(|g| (action.block_eigenvalue(g, k, residue) - irrep.characters[g]).norm() < 1e-9);
            if matches {
                out.push((k, residue));
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of one irrep sector below `e_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSpectrum {
    pub irrep_label: String,
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Each level counted once per `s_α`-fold multiplet.
    pub degeneracy_divided: bool,
    /// Levels are complete up to this energy.
    pub reliable_below: f64,
}

impl ProjectedSpectrum {
    /// Number of levels `≤ e`.
    pub fn counting(&self, e: f64) -> usize {
        self.eigenvalues.partition_point(|&x| x <= e)
    }
}

/// Largest `E` for which the classical region `H ≤ E` lies inside the
/// oscillator region `p²/2m + mω²r²/2 ≤ (N+1)ħω` covered by the basis.
///
/// A point `(q, p)` with `H ≤ E` escapes the covered region iff
/// `E > V(q) + max(0, E_b - mω²r²/2)`, so the ceiling is the minimum of that
/// bound over configuration space; sampled on a polar grid.
pub fn basis_ceiling(spec: &ModelSpec, basis: &QuantumBasis) -> Result<f64> {
    let v = planar_potential(spec)?;
    let mw2 = spec.mass * basis.omega * basis.omega;
    let e_b = (basis.shells + 1) as f64 * spec.hbar_eff * basis.omega;
    let r_b = (2.0 * e_b / mw2).sqrt();
    let (n_ang, n_rad) = (720, 800);
    let mut ceiling = f64::INFINITY;
    for a in 0..n_ang {
        let phi = 2.0 * PI * a as f64 / n_ang as f64;
        let (c, s) = (phi.cos(), phi.sin());
        for k in 0..=n_rad {
            let r = 2.0 * r_b * k as f64 / n_rad as f64;
            let bound = v.eval(r * c, r * s) + (e_b - 0.5 * mw2 * r * r).max(0.0);
            ceiling = ceiling.min(bound);
        }
    }
    Ok(ceiling)
}

/// Fails when `e_max` comes within [`CEILING_MARGIN`] of the basis ceiling.
pub fn check_basis(spec: &ModelSpec, basis: &QuantumBasis, e_max: f64) -> Result<f64> {
    let ceiling = basis_ceiling(spec, basis)?;
    if !(ceiling > 0.0) || e_max > (1.0 - CEILING_MARGIN) * ceiling {
        return Err(Error::BasisTooSmall(format!(
            "requested energy {e_max} is within {:.0}% of the basis ceiling {ceiling:.6} ({} shells)",
            CEILING_MARGIN * 100.0,
            basis.shells
        )));
    }
    Ok(ceiling)
}

/// Spectrum of irrep `α` below `e_max` by sector selection.
///
/// Checks `[H, U(g)] = 0` first; standard irreps of a double group are
/// rejected since they carry no spinor states.
pub fn project_spectrum(ham: &PlanarHamiltonian, group: &FiniteGroup, irrep: &Irrep, e_max: f64) -> Result<ProjectedSpectrum> {
    check_basis(&ham.model, &ham.basis, e_max)?;
    let action = RotationAction::new(group, &ham.basis)?;
    let defect = ham.commutation_defect(&action);
    if defect > COMMUTATION_TOL {
        return Err(Error::Tolerance(format!("‖[H, U(g)]‖ = {defect:.3e} exceeds {COMMUTATION_TOL:.0e}")));
    }
    let blocks = sector_blocks(group, irrep, &action)?;
    let parts: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|&(k, r)| ham.block_eigenvalues(k, r))
        .collect::<Result<_>>()?;
    let mut eigenvalues: Vec<f64> = parts.into_iter().flatten().filter(|&e| e <= e_max).collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(ProjectedSpectrum { irrep_label: irrep.label.clone(), eigenvalues, degeneracy_divided: true, reliable_below: e_max })
}

/// Explicit projector `(s/|G|) Σ_g χ_α(g) U(g)†` on the full space of `ham`.
pub fn explicit_projector(ham: &PlanarHamiltonian, group: &FiniteGroup, irrep: &Irrep) -> Result<CMatrix> {
    let action = RotationAction::new(group, &ham.basis)?;
    let rep: Vec<CMatrix> = (0..group.order()).map(|g| action.matrix(g, ham)).collect();
    Ok(full_projector(irrep, group, &rep))
}

/// All eigenvalues of `H` restricted to the range of the explicit projector.
pub fn explicit_projected_eigenvalues(ham: &PlanarHamiltonian, group: &FiniteGroup, irrep: &Irrep) -> Result<Vec<f64>> {
    let p = explicit_projector(ham, group, irrep)?;
    let pe = SymmetricEigen::new(p);
    let keep: Vec<usize> = (0..pe.eigenvalues.len()).filter(|&i| pe.eigenvalues[i] > 0.5).collect();
    if keep.is_empty() {
        return Ok(Vec::new());
    }
    let q = pe.eigenvectors.select_columns(&keep);
    let hq = q.adjoint() * ham.dense() * &q;
    let mut ev: Vec<f64> = SymmetricEigen::new(hq).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Eigenvalues of the selected sector on the whole (small) basis.
pub fn selected_eigenvalues(ham: &PlanarHamiltonian, group: &FiniteGroup, irrep: &Irrep) -> Result<Vec<f64>> {
    let action = RotationAction::new(group, &ham.basis)?;
    let mut ev = Vec::new();
    for (k, r) in sector_blocks(group, irrep, &action)? {
        ev.extend(ham.block_eigenvalues(k, r)?);
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `max |E_selection - E_projector|`; infinite when level counts differ.
pub fn projection_consistency(ham: &PlanarHamiltonian, group: &FiniteGroup, irrep: &Irrep) -> Result<f64> {
    let a = selected_eigenvalues(ham, group, irrep)?;
    let b = explicit_projected_eigenvalues(ham, group, irrep)?;
    if a.len() != b.len() {
        return Ok(f64::INFINITY);
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Degeneracy forced on an irrep sector by conventional time reversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KramersExpectation {
    /// `T² = -1` on a real irrep or `T² = +1` on a pseudo-real one.
    Doubled,
    /// Complex irrep: spectrum coincides with that of the conjugate irrep.
    PairedWith(String),
    /// No degeneracy required.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KramersReport {
    pub irrep: String,
    pub fs_indicator: i32,
    pub expectation: KramersExpectation,
    pub levels_checked: usize,
    /// Largest `|E_a - E_b| / max(|E_a|, |E_b|)` over the required pairs.
    pub max_relative_gap: f64,
    pub passed: bool,
    pub note: String,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Check TR-forced degeneracies of `spectra` (one per irrep, matched by label).
pub fn kramers_check(group: &FiniteGroup, irreps: &[Irrep], spectra: &[ProjectedSpectrum], tol: f64) -> Vec<KramersReport> {
    let t2 = if group.two_s % 2 == 1 { -1 } else { 1 };
    let mut out = Vec::new();
    for s in spectra {
        let Some(irrep) = irreps.iter().find(|i| i.label == s.irrep_label) else {
            continue;
        };
        let fs = irrep.fs_indicator;
        let mut report = KramersReport {
            irrep: irrep.label.clone(),
            fs_indicator: fs,
            expectation: KramersExpectation::Unconstrained,
            levels_checked: 0,
            max_relative_gap: 0.0,
            passed: true,
            note: String::new(),
        };
        if fs != 0 && fs == -t2 {
            report.expectation = KramersExpectation::Doubled;
            let ev = &s.eigenvalues;
            report.levels_checked = ev.len();
            report.max_relative_gap = ev.chunks(2).filter(|c| c.len() == 2).map(|c| relative_gap(c[0], c[1])).fold(0.0, f64::max);
            report.passed = report.max_relative_gap < tol;
            if ev.len() % 2 == 1 {
                report.passed = false;
                report.note = format!("odd number of levels ({})", ev.len());
            }
        } else if fs == 0 {
            let partner = irreps.iter().find(|j| {
                j.label != irrep.label && j.characters.iter().zip(&irrep.characters).all(|(a, b)| (a - b.conj()).norm() < 1e-9)
            });
            match partner {
                None => {
                    report.passed = false;
                    report.note = "no conjugate irrep in the table".into();
                }
                Some(p) => {
                    report.expectation = KramersExpectation::PairedWith(p.label.clone());
                    match spectra.iter().find(|t| t.irrep_label == p.label) {
                        None => report.note = format!("spectrum of {} not supplied", p.label),
                        Some(t) => {
                            let n = s.eigenvalues.len().min(t.eigenvalues.len());
                            report.levels_checked = n;
                            report.max_relative_gap = s.eigenvalues[..n]
                                .iter()
                                .zip(&t.eigenvalues[..n])
                                .map(|(a, b)| relative_gap(*a, *b))
                                .fold(0.0, f64::max);
                            report.passed = report.max_relative_gap < tol;
                            if s.eigenvalues.len() != t.eigenvalues.len() {
                                report.passed = false;
                                report.note = format!("level counts differ: {} vs {}", s.eigenvalues.len(), t.eigenvalues.len());
                            }
                        }
                    }
                }
            }
        }
        out.push(report);
    }
    out
}

/// Gaussian-broadened level density `Σ_n g_σ(E - E_n)`.
///
/// With `mean` supplied the smooth part is stored separately and the
/// oscillatory part is the difference; otherwise the whole density is
/// reported as oscillatory with a zero mean part.
pub fn quantum_density(
    spectrum: &ProjectedSpectrum,
    energies: &[f64],
    sigma: f64,
    hbar: f64,
    mean: Option<&dyn Fn(f64) -> f64>,
) -> Result<DensityGrid> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("smoothing width must be positive, got {sigma}")));
    }
    let top = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top + 5.0 * sigma > spectrum.reliable_below {
        return Err(Error::InsufficientRange { available: spectrum.reliable_below, required: top + 5.0 * sigma });
    }
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let total: Vec<f64> = energies
        .iter()
        .map(|&e| {
            let lo = spectrum.eigenvalues.partition_point(|&x| x < e - 10.0 * sigma);
            let hi = spectrum.eigenvalues.partition_point(|&x| x <= e + 10.0 * sigma);
            spectrum.eigenvalues[lo..hi].iter().map(|&x| norm * (-((e - x) / sigma).powi(2) / 2.0).exp()).sum()
        })
        .collect();
    let mean_part: Vec<f64> = match mean {
        Some(f) => energies.iter().map(|&e| f(e)).collect(),
        None => vec![0.0; energies.len()],
    };
    let oscillatory_part = total.iter().zip(&mean_part).map(|(t, m)| t - m).collect();
    Ok(DensityGrid {
        irrep_label: spectrum.irrep_label.clone(),
        energies: energies.to_vec(),
        mean_part,
        oscillatory_part,
        smoothing_sigma: sigma,
        hbar_eff: hbar,
    })
}

/// Machine-readable spectrum file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumExport {
    pub irrep: String,
    pub eigenvalues: Vec<f64>,
    pub degeneracy_divided: bool,
    pub reliable_below: f64,
    pub basis_params: QuantumBasis,
    pub model_params: ModelSpec,
}

impl SpectrumExport {
    pub fn new(spectrum: &ProjectedSpectrum, ham: &PlanarHamiltonian) -> Self {
        Self {
            irrep: spectrum.irrep_label.clone(),
            eigenvalues: spectrum.eigenvalues.clone(),
            degeneracy_divided: spectrum.degeneracy_divided,
            reliable_below: spectrum.reliable_below,
            basis_params: ham.basis,
            model_params: ham.model.clone(),
        }
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Largest relative change of the lowest `count` levels between two spectra.
pub fn convergence_defect(coarse: &ProjectedSpectrum, fine: &ProjectedSpectrum, count: usize) -> f64 {
    coarse
        .eigenvalues
        .iter()
        .zip(&fine.eigenvalues)
        .take(count)
        .map(|(a, b)| relative_gap(*a, *b))
        .fold(0.0, f64::max)
}

/// `‖P‖` (largest entry) of an explicit projector, zero for standard irreps.
pub fn projector_norm(p: &CMatrix) -> f64 {
    linalg::max_abs(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouprep::{analyse, build_double_group, build_point_group, GroupSpec};

    fn spec(lambda: f64, quartic: f64, kappa: f64, hbar: f64) -> ModelSpec {
        ModelSpec {
            family: "planar_c3".into(),
            mass: 1.0,
            lambda,
            epsilon: 0.0,
            mu: 0.0,
            quartic,
            kappa,
            hbar_eff: hbar,
            params: vec![],
        }
    }

    fn c3(two_s: u32) -> (FiniteGroup, Vec<Irrep>) {
        let g = build_point_group(&GroupSpec::Cn { n: 3, axis: [0.0, 0.0, 1.0] }).unwrap();
        let g = build_double_group(&g, two_s).unwrap();
        let irreps = analyse(&g, 3).unwrap();
        (g, irreps)
    }

    #[test]
    fn potential_polynomial_matches_model() {
        use crate::dynamics::{Model, PlanarC3};
        let mut s = spec(0.8, 0.1, 0.3, 0.1);
        s.epsilon = 0.02;
        let p = planar_potential(&s).unwrap();
        let m = PlanarC3 { spec: s.clone() };
        let mut g = [0.0; 2];
        for &(x, y) in &[(0.3, -0.7), (1.1, 0.4), (-0.5, 0.9)] {
            assert!((p.eval(x, y) - m.potential(&[x, y])).abs() < 1e-12);
            m.gradient(&[x, y], &mut g);
            assert!((p.dx().eval(x, y) - g[0]).abs() < 1e-12);
            assert!((p.dy().eval(x, y) - g[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_oscillator_levels() {
        let s = spec(0.0, 0.0, 0.0, 0.1);
        let basis = QuantumBasis { shells: 30, omega: 1.0, two_s: 0 };
        let h = build_hamiltonian(&s, basis).unwrap();
        let mut ev: Vec<f64> = (0..3).flat_map(|r| h.block_eigenvalues(0, r).unwrap()).collect();
        ev.sort_by(f64::total_cmp);
        let mut k = 0;
        for n in 0..10 {
            for _ in 0..=n {
                assert!((ev[k] - (n + 1) as f64 * 0.1).abs() < 1e-12 * (n + 1) as f64);
                k += 1;
            }
        }
    }

    #[test]
    fn spin_levels_double_without_coupling() {
        let s = spec(0.6, 0.1, 0.0, 0.1);
        let h = build_hamiltonian(&s, QuantumBasis { shells: 16, omega: 1.0, two_s: 1 }).unwrap();
        for r in 0..3 {
            let a = h.block_eigenvalues(0, r).unwrap();
            let b = h.block_eigenvalues(1, r).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_and_symmetric() {
        let s = spec(1.0, 0.1, 0.3, 0.05);
        let basis = QuantumBasis { shells: 20, omega: 1.0, two_s: 1 };
        let h = build_hamiltonian(&s, basis).unwrap();
        assert!(h.hermiticity_defect() < 1e-12);
        let (g, _) = c3(1);
        let action = RotationAction::new(&g, &basis).unwrap();
        assert!(h.commutation_defect(&action) < 1e-12);
        let dense = h.dense();
        assert!(linalg::hermiticity_defect(&dense) < 1e-12);
    }

    #[test]
    fn selection_agrees_with_explicit_projector() {
        let s = spec(1.0, 0.1, 0.3, 0.2);
        let basis = QuantumBasis { shells: 9, omega: 1.0, two_s: 1 };
        let h = build_hamiltonian(&s, basis).unwrap();
        let (g, irreps) = c3(1);
        let mut total = 0;
        for irrep in &irreps {
            if irrep.is_extra() {
                let d = projection_consistency(&h, &g, irrep).unwrap();
                assert!(d < 1e-9, "{}: {d}", irrep.label);
                total += selected_eigenvalues(&h, &g, irrep).unwrap().len();
            } else {
                let p = explicit_projector(&h, &g, irrep).unwrap();
                assert!(projector_norm(&p) < 1e-10);
                assert!(matches!(selected_eigenvalues(&h, &g, irrep), Err(Error::VanishingProjector { .. })));
            }
        }
        assert_eq!(total, basis.orbital_dim() * 2);
    }

    #[test]
    fn mirror_breaking_term_uses_complex_blocks() {
        // ε breaks the mirror; compare the complex path against the dense route
        let mut s = spec(1.0, 0.1, 0.3, 0.2);
        s.epsilon = 0.01;
        let basis = QuantumBasis { shells: 9, omega: 1.0, two_s: 1 };
        let h = build_hamiltonian(&s, basis).unwrap();
        let (g, irreps) = c3(1);
        for irrep in irreps.iter().filter(|i| i.is_extra()) {
            assert!(projection_consistency(&h, &g, irrep).unwrap() < 1e-9);
        }
    }

    #[test]
    fn kramers_and_conjugate_pairs() {
        let s = spec(1.0, 0.1, 0.3, 0.1);
        let basis = QuantumBasis { shells: 24, omega: 1.0, two_s: 1 };
        let h = build_hamiltonian(&s, basis).unwrap();
        let (g, irreps) = c3(1);
        let ceiling = basis_ceiling(&s, &basis).unwrap();
        let spectra: Vec<ProjectedSpectrum> = irreps
            .iter()
            .filter(|i| i.is_extra())
            .map(|i| project_spectrum(&h, &g, i, 0.9 * ceiling).unwrap())
            .collect();
        let reports = kramers_check(&g, &irreps, &spectra, 1e-8);
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
        assert!(reports.iter().any(|r| r.expectation == KramersExpectation::Doubled));
        assert_eq!(reports.iter().filter(|r| matches!(r.expectation, KramersExpectation::PairedWith(_))).count(), 2);
    }

    #[test]
    fn basis_too_small_is_reported() {
        let s = spec(1.0, 0.1, 0.3, 0.1);
        let basis = QuantumBasis { shells: 10, omega: 1.0, two_s: 1 };
        let ceiling = basis_ceiling(&s, &basis).unwrap();
        assert!(check_basis(&s, &basis, 0.5 * ceiling).is_ok());
        assert!(matches!(check_basis(&s, &basis, 0.97 * ceiling), Err(Error::BasisTooSmall(_))));
    }

    #[test]
    fn single_level_density_has_unit_weight() {
        let sp = ProjectedSpectrum { irrep_label: "a".into(), eigenvalues: vec![1.0], degeneracy_divided: true, reliable_below: 5.0 };
        let es: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.001).collect();
        let d = quantum_density(&sp, &es, 0.05, 0.1, None).unwrap();
        let integral: f64 = d.oscillatory_part.iter().sum::<f64>() * 0.001;
        assert!((integral - 1.0).abs() < 1e-9);
        assert!(matches!(quantum_density(&sp, &[4.9], 0.05, 0.1, None), Err(Error::InsufficientRange { .. })));
    }
}

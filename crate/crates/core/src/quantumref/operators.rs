//! Ladder-operator algebra in the circular oscillator basis `|n_R, n_L⟩`.
//!
//! `a_x = (a_R + a_L)/√2`, `a_y = i(a_R - a_L)/√2`, so that
//! `L_z = ħ(n_R - n_L)`. Products are applied to sparse kets without any
//! intermediate truncation, which keeps matrix elements of polynomial
//! operators exact inside the retained shells.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

/// Sparse ket: `((n_R, n_L), amplitude)` sorted by occupation, no duplicates.
pub type Ket = Vec<((u32, u32), Complex64)>;

/// Linear combination `c₀ a_R + c₁ a_L + c₂ a_R† + c₃ a_L†`.
#[derive(Debug, Clone, Copy)]
pub struct LadderOp(pub [Complex64; 4]);

/// Oscillator length and momentum scales `√(ħ/2mω)` and `√(mωħ/2)`.
#[derive(Debug, Clone, Copy)]
pub struct Scales {
    pub length: f64,
    pub momentum: f64,
}

impl Scales {
    pub fn new(mass: f64, omega: f64, hbar: f64) -> Self {
        Self { length: (hbar / (2.0 * mass * omega)).sqrt(), momentum: (mass * omega * hbar / 2.0).sqrt() }
    }

    pub fn x(&self) -> LadderOp {
        let s = self.length * FRAC_1_SQRT_2;
        LadderOp([s, s, s, s].map(|v| Complex64::new(v, 0.0)))
    }

    pub fn y(&self) -> LadderOp {
        let s = self.length * FRAC_1_SQRT_2;
        LadderOp([Complex64::new(0.0, s), Complex64::new(0.0, -s), Complex64::new(0.0, -s), Complex64::new(0.0, s)])
    }

    pub fn px(&self) -> LadderOp {
        let t = self.momentum * FRAC_1_SQRT_2;
        LadderOp([Complex64::new(0.0, -t), Complex64::new(0.0, -t), Complex64::new(0.0, t), Complex64::new(0.0, t)])
    }

    pub fn py(&self) -> LadderOp {
        let t = self.momentum * FRAC_1_SQRT_2;
        LadderOp([t, -t, t, -t].map(|v| Complex64::new(v, 0.0)))
    }
}

pub fn basis_ket(nr: u32, nl: u32) -> Ket {
    vec![((nr, nl), Complex64::new(1.0, 0.0))]
}

pub fn apply(op: &LadderOp, ket: &Ket) -> Ket {
    let mut out: Ket = Vec::with_capacity(4 * ket.len());
    for &((nr, nl), amp) in ket {
        if nr > 0 {
            out.push(((nr - 1, nl), op.0[0] * amp * (nr as f64).sqrt()));
        }
        if nl > 0 {
            out.push(((nr, nl - 1), op.0[1] * amp * (nl as f64).sqrt()));
        }
        out.push(((nr + 1, nl), op.0[2] * amp * ((nr + 1) as f64).sqrt()));
        out.push(((nr, nl + 1), op.0[3] * amp * ((nl + 1) as f64).sqrt()));
    }
    normalize(out)
}

/// Sort by occupation and merge duplicates.
pub fn normalize(mut ket: Ket) -> Ket {
    ket.sort_by_key(|e| e.0);
    let mut out: Ket = Vec::with_capacity(ket.len());
    for (k, v) in ket {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += v,
            _ => out.push((k, v)),
        }
    }
    out
}

pub fn add_scaled(acc: &mut Ket, ket: &Ket, scale: Complex64) {
    acc.extend(ket.iter().map(|&(k, v)| (k, v * scale)));
}

/// Real polynomial `Σ c x^a y^b` in the planar coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly(pub Vec<(f64, u32, u32)>);

impl Poly {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.0.iter().map(|&(c, a, b)| c * x.powi(a as i32) * y.powi(b as i32)).sum()
    }

    pub fn dx(&self) -> Poly {
        Poly(self.0.iter().filter(|t| t.1 > 0 && t.0 != 0.0).map(|&(c, a, b)| (c * a as f64, a - 1, b)).collect())
    }

    pub fn dy(&self) -> Poly {
        Poly(self.0.iter().filter(|t| t.2 > 0 && t.0 != 0.0).map(|&(c, a, b)| (c * b as f64, a, b - 1)).collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().filter(|t| t.0 != 0.0).map(|t| t.1 + t.2).max().unwrap_or(0)
    }

    /// `p(x̂, ŷ)|ψ⟩`; `x̂` and `ŷ` commute so the monomial order is irrelevant.
    pub fn apply(&self, scales: &Scales, ket: &Ket) -> Ket {
        let (x, y) = (scales.x(), scales.y());
        let max_b = self.0.iter().map(|t| t.2).max().unwrap_or(0);
        // y^b |ψ⟩ for all needed b, then x^a on top
        let mut y_pows = vec![ket.clone()];
        for b in 1..=max_b {
            let next = apply(&y, &y_pows[b as usize - 1]);
            y_pows.push(next);
        }
        let mut acc: Ket = Vec::new();
        for &(c, a, b) in &self.0 {
            if c == 0.0 {
                continue;
            }
            let mut k = y_pows[b as usize].clone();
            for _ in 0..a {
                k = apply(&x, &k);
            }
            add_scaled(&mut acc, &k, Complex64::new(c, 0.0));
        }
        normalize(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator_on(a: &LadderOp, b: &LadderOp, ket: &Ket) -> Ket {
        let mut out = apply(a, &apply(b, ket));
        add_scaled(&mut out, &apply(b, &apply(a, ket)), Complex64::new(-1.0, 0.0));
        normalize(out).into_iter().filter(|e| e.1.norm() > 1e-14).collect()
    }

    #[test]
    fn canonical_commutators() {
        let sc = Scales::new(1.3, 0.7, 0.05);
        let hbar = 0.05;
        let ket = basis_ket(3, 5);
        let xpx = commutator_on(&sc.x(), &sc.px(), &ket);
        assert_eq!(xpx.len(), 1);
        assert!((xpx[0].1 - Complex64::new(0.0, hbar)).norm() < 1e-14);
        let ypy = commutator_on(&sc.y(), &sc.py(), &ket);
        assert!((ypy[0].1 - Complex64::new(0.0, hbar)).norm() < 1e-14);
        assert!(commutator_on(&sc.x(), &sc.py(), &ket).is_empty());
        assert!(commutator_on(&sc.x(), &sc.y(), &ket).is_empty());
        assert!(commutator_on(&sc.px(), &sc.py(), &ket).is_empty());
    }

    #[test]
    fn angular_momentum_is_diagonal() {
        let hbar = 0.2;
        let sc = Scales::new(1.0, 1.0, hbar);
        for (nr, nl) in [(0, 0), (2, 1), (1, 4)] {
            let k = basis_ket(nr, nl);
            let mut lz = apply(&sc.x(), &apply(&sc.py(), &k));
            add_scaled(&mut lz, &apply(&sc.y(), &apply(&sc.px(), &k)), Complex64::new(-1.0, 0.0));
            let lz: Ket = normalize(lz).into_iter().filter(|e| e.1.norm() > 1e-14).collect();
            if nr == nl {
                assert!(lz.is_empty());
                continue;
            }
            assert_eq!(lz.len(), 1);
            assert_eq!(lz[0].0, (nr, nl));
            assert!((lz[0].1.re - hbar * (nr as f64 - nl as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_of_monomials() {
        let p = Poly(vec![(2.0, 3, 1), (-1.0, 0, 2), (0.5, 0, 0)]);
        assert_eq!(p.dx(), Poly(vec![(6.0, 2, 1)]));
        assert_eq!(p.dy(), Poly(vec![(2.0, 3, 0), (-2.0, 0, 1)]));
        assert_eq!(p.degree(), 4);
    }
}

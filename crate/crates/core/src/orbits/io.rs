use super::PeriodicOrbit;
use crate::dynamics::PhaseState;
use crate::error::Result;
use crate::grouprep::FiniteGroup;
use crate::linalg::c;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// One line of the orbit database.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OrbitRecord {
    pub label: String,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "T_prim")]
    pub primitive_period: f64,
    pub r: u32,
    pub action: f64,
    pub maslov: i32,
    #[serde(rename = "detM_minus_I")]
    pub det_m_minus_1: f64,
    pub g_label: String,
    pub tr_d_re: f64,
    pub tr_d_im: f64,
    #[serde(rename = "A_re")]
    pub amplitude_re: f64,
    #[serde(rename = "A_im")]
    pub amplitude_im: f64,
    pub initial_state: PhaseState,
    /// Row-major transverse monodromy.
    pub monodromy: Vec<f64>,
    /// Row-major `d`, interleaved real and imaginary parts.
    pub d: Vec<f64>,
    pub marginal: bool,
}

impl OrbitRecord {
    pub fn from_orbit(o: &PeriodicOrbit) -> Self {
        let k = o.monodromy.nrows();
        let dim = o.d.nrows();
        Self {
            label: o.label.clone(),
            energy: o.energy,
            period: o.period,
            primitive_period: o.primitive_period,
            r: o.repetition,
            action: o.action,
            maslov: o.maslov,
            det_m_minus_1: o.det_m_minus_1,
            g_label: o.g_label.clone(),
            tr_d_re: o.tr_d.re,
            tr_d_im: o.tr_d.im,
            amplitude_re: o.amplitude.re,
            amplitude_im: o.amplitude.im,
            initial_state: o.initial.clone(),
            monodromy: (0..k * k).map(|i| o.monodromy[(i / k, i % k)]).collect(),
            d: (0..dim * dim).flat_map(|i| {
                let z = o.d[(i / dim, i % dim)];
                [z.re, z.im]
            })
            .collect(),
            marginal: o.marginal,
        }
    }

    pub fn to_orbit(&self, group: &FiniteGroup) -> Result<PeriodicOrbit> {
        let g = (0..group.order())
            .find(|&i| group.label(i) == self.g_label)
            .ok_or_else(|| crate::Error::InvalidParameter(format!("unknown group element {}", self.g_label)))?;
        let k = (self.monodromy.len() as f64).sqrt().round() as usize;
        let dim = ((self.d.len() / 2) as f64).sqrt().round() as usize;
        Ok(PeriodicOrbit {
            label: self.label.clone(),
            energy: self.energy,
            initial: self.initial_state.clone(),
            period: self.period,
            primitive_period: self.primitive_period,
            repetition: self.r,
            action: self.action,
            monodromy: DMatrix::from_row_slice(k, k, &self.monodromy),
            maslov: self.maslov,
            det_m_minus_1: self.det_m_minus_1,
            marginal: self.marginal,
            g,
            g_label: self.g_label.clone(),
            d: DMatrix::from_fn(dim, dim, |i, j| {
                let at = 2 * (i * dim + j);
                c(self.d[at], self.d[at + 1])
            }),
            tr_d: c(self.tr_d_re, self.tr_d_im),
            amplitude: c(self.amplitude_re, self.amplitude_im),
        })
    }
}

pub fn write_orbits_jsonl<W: Write>(orbits: &[PeriodicOrbit], mut out: W) -> Result<()> {
    for o in orbits {
        serde_json::to_writer(&mut out, &OrbitRecord::from_orbit(o))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_orbits_jsonl<R: BufRead>(group: &FiniteGroup, input: R) -> Result<Vec<PeriodicOrbit>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: OrbitRecord = serde_json::from_str(&line)?;
        out.push(rec.to_orbit(group)?);
    }
    Ok(out)
}

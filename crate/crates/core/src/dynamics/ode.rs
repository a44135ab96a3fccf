//! Dormand-Prince 5(4) with step-size control and restartable driving.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, h_init: 1e-3, h_max: 0.05, h_min: 1e-14, max_steps: 50_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// What the driver does after an accepted step.
pub enum Flow {
    Continue,
    /// Restart from a new state (event handled by the caller).
    Restart { t: f64, y: Vec<f64> },
    Stop,
}

/// Accepted step `[t0, t1]`.
pub struct Step<'a> {
    pub t0: f64,
    pub y0: &'a [f64],
    pub t1: f64,
    pub y1: &'a [f64],
}

pub struct Solver<F> {
    f: F,
    pub config: OdeConfig,
}

impl<F: Fn(f64, &[f64], &mut [f64])> Solver<F> {
    pub fn new(f: F, config: OdeConfig) -> Self {
        Self { f, config }
    }

    pub fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }

    /// One Dormand-Prince step; returns the 5th-order solution and the
    /// scaled error norm.
    fn attempt(&self, t: f64, y: &[f64], k1: &[f64], h: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let n = y.len();
        let mut tmp = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        self.rhs(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        self.rhs(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        self.rhs(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        self.rhs(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        self.rhs(t + h, &tmp, &mut k6);
        let mut y1 = vec![0.0; n];
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        self.rhs(t + h, &y1, &mut k7);
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.config.atol + self.config.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        (y1, k7, (err / n as f64).sqrt())
    }

    /// Single unchecked step of size `h` from `(t, y)`; used to localise
    /// events inside an accepted step to full step accuracy.
    pub fn fixed_step(&self, t: f64, y: &[f64], h: f64) -> Vec<f64> {
        if h == 0.0 {
            return y.to_vec();
        }
        let mut k1 = vec![0.0; y.len()];
        self.rhs(t, y, &mut k1);
        self.attempt(t, y, &k1, h).0
    }

    /// Integrate to `t_end`, calling `on_step` after every accepted step.
    pub fn run<C>(&self, t0: f64, y0: &[f64], t_end: f64, mut on_step: C) -> Result<(f64, Vec<f64>)>
    where
        C: FnMut(&Step) -> Result<Flow>,
    {
        let cfg = self.config;
        let n = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k1 = vec![0.0; n];
        self.rhs(t, &y, &mut k1);
        let mut h = cfg.h_init.min(cfg.h_max);
        let mut steps = 0usize;
        while t < t_end {
            if steps >= cfg.max_steps {
                return Err(Error::StepUnderflow { time: t });
            }
            let last = t + h >= t_end;
            let h_try = if last { t_end - t } else { h };
            let (y1, k7, err) = self.attempt(t, &y, &k1, h_try);
            steps += 1;
            if !err.is_finite() {
                h *= 0.25;
                if h < cfg.h_min {
                    return Err(Error::StepUnderflow { time: t });
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                let t1 = if last { t_end } else { t + h_try };
                let flow = on_step(&Step { t0: t, y0: &y, t1, y1: &y1 })?;
                match flow {
                    Flow::Continue => {
                        t = t1;
                        y = y1;
                        k1 = k7;
                    }
                    Flow::Restart { t: tr, y: yr } => {
                        t = tr;
                        y = yr;
                        self.rhs(t, &y, &mut k1);
                    }
                    Flow::Stop => return Ok((t1, y1)),
                }
                if !last || t < t_end {
                    h = (h_try * factor).min(cfg.h_max);
                }
            } else {
                h = h_try * factor.min(1.0);
                if h < cfg.h_min {
                    return Err(Error::StepUnderflow { time: t });
                }
            }
        }
        Ok((t, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let s = Solver::new(|_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], OdeConfig::default());
        let (t, y) = s.run(0.0, &[1.0], 3.0, |_| Ok(Flow::Continue)).unwrap();
        assert_eq!(t, 3.0);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn oscillator_period() {
        let s = Solver::new(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            OdeConfig::default(),
        );
        let (_, y) = s.run(0.0, &[1.0, 0.0], 2.0 * std::f64::consts::PI, |_| Ok(Flow::Continue)).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }

    #[test]
    fn fixed_step_agrees_with_adaptive_over_short_interval() {
        let s = Solver::new(|t, _y: &[f64], dy: &mut [f64]| dy[0] = t.cos(), OdeConfig::default());
        let y = s.fixed_step(0.0, &[0.0], 0.01);
        assert!((y[0] - 0.01f64.sin()).abs() < 1e-15);
    }
}

//! Min-max scaling of all network inputs and outputs to [-1, 1].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Domain, Input, State};

/// Sampling box for states, inputs, domain, and prediction time, inflated by
/// the factor `kappa` so trained models tolerate slight range violations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Boundaries {
    /// Joint angle bound, rad.
    pub q_max: f64,
    /// Joint velocity bound, rad/s.
    pub qd_max: f64,
    /// Bellows pressure bound, Pa.
    pub p_max: f64,
    /// Payload bound, kg.
    pub payload_max: f64,
    /// Base tilt bound, rad.
    pub tilt_max: f64,
    /// Range inflation factor.
    pub kappa: f64,
}

impl Default for Boundaries {
    fn default() -> Self {
        Self {
            q_max: 25.0_f64.to_radians(),
            qd_max: 30.0_f64.to_radians(),
            p_max: 0.7e5,
            payload_max: 0.2,
            tilt_max: 90.0_f64.to_radians(),
            kappa: 1.25,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
struct Channel {
    min: f64,
    max: f64,
}

impl Channel {
    fn scale(&self, v: f64) -> f64 {
        2.0 * (v - self.min) / (self.max - self.min) - 1.0
    }

    fn unscale(&self, s: f64) -> f64 {
        (s + 1.0) * 0.5 * (self.max - self.min) + self.min
    }

    /// d(scaled)/d(physical)
    fn factor(&self) -> f64 {
        2.0 / (self.max - self.min)
    }
}

/// Channel-wise affine map between physical units and the network's [-1, 1]
/// ranges. Time scales over `[0, kappa T_s]`, angles over `±kappa q_max`, and
/// so on, per the boundaries the scaler was built from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scaler {
    n: usize,
    t: Channel,
    q: Channel,
    qd: Channel,
    p: Channel,
    payload: Channel,
    tilt: Channel,
}

impl Scaler {
    pub fn new(n: usize, t_s: f64, b: &Boundaries) -> Self {
        let k = b.kappa;
        Self {
            n,
            t: Channel { min: 0.0, max: k * t_s },
            q: Channel { min: -k * b.q_max, max: k * b.q_max },
            qd: Channel { min: -k * b.qd_max, max: k * b.qd_max },
            p: Channel { min: 0.0, max: k * b.p_max },
            payload: Channel { min: 0.0, max: k * b.payload_max },
            tilt: Channel { min: 0.0, max: k * b.tilt_max },
        }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    /// Upper end of the time channel, `kappa T_s`.
    pub fn time_span(&self) -> f64 {
        self.t.max
    }

    pub fn scale_time(&self, t: f64) -> f64 {
        self.t.scale(t)
    }

    /// Scaled state `[q_s, q̇_s]`, length `2n`.
    pub fn scale_state(&self, state: &State) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.q.scale(state.q[i])
            } else {
                self.qd.scale(state.qd[i - n])
            }
        })
    }

    pub fn unscale_state(&self, x_s: &DVector<f64>) -> Result<State> {
        if x_s.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                what: "scaled state",
                expected: 2 * self.n,
                got: x_s.len(),
            });
        }
        let n = self.n;
        State::new(
            DVector::from_fn(n, |i, _| self.q.unscale(x_s[i])),
            DVector::from_fn(n, |i, _| self.qd.unscale(x_s[n + i])),
        )
    }

    pub fn scale_input(&self, input: &Input) -> DVector<f64> {
        DVector::from_fn(2 * self.n, |i, _| self.p.scale(input.p_d[i]))
    }

    pub fn unscale_input(&self, u_s: &DVector<f64>) -> Input {
        Input::new(DVector::from_fn(2 * self.n, |i, _| self.p.unscale(u_s[i])))
    }

    pub fn scale_domain(&self, d: &Domain) -> [f64; 2] {
        [self.payload.scale(d.payload), self.tilt.scale(d.tilt)]
    }

    pub fn unscale_domain(&self, d_s: &[f64; 2]) -> Domain {
        Domain {
            payload: self.payload.unscale(d_s[0]),
            tilt: self.tilt.unscale(d_s[1]),
        }
    }

    /// d(scaled)/d(physical) per state channel, length `2n`.
    pub fn state_factors(&self) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.q.factor()
            } else {
                self.qd.factor()
            }
        })
    }

    /// d(scaled)/d(physical) of state channel `i`.
    pub fn state_factor(&self, i: usize) -> f64 {
        if i < self.n {
            self.q.factor()
        } else {
            self.qd.factor()
        }
    }

    /// Allocation-free unscaling for hot loops.
    pub fn unscale_state_slice(&self, x_s: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = self.q.unscale(x_s[i]);
            out[n + i] = self.qd.unscale(x_s[n + i]);
        }
    }

    pub fn unscale_input_slice(&self, u_s: &[f64], out: &mut [f64]) {
        for i in 0..2 * self.n {
            out[i] = self.p.unscale(u_s[i]);
        }
    }

    pub fn scale_state_slice(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = self.q.scale(x[i]);
            out[n + i] = self.qd.scale(x[n + i]);
        }
    }
}

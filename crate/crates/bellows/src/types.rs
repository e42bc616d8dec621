//! State, input, and domain vectors of the plant model.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint-space state `[q, q̇]` in radians and radians per second.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Joint angles, rad.
    pub q: DVector<f64>,
    /// Joint velocities, rad/s.
    pub qd: DVector<f64>,
}

impl State {
    pub fn new(q: DVector<f64>, qd: DVector<f64>) -> Result<Self> {
        if q.len() != qd.len() {
            return Err(Error::DimensionMismatch {
                what: "state velocity",
                expected: q.len(),
                got: qd.len(),
            });
        }
        Ok(Self { q, qd })
    }

    /// All-zero state for an `n`-joint chain.
    pub fn zeros(n: usize) -> Self {
        Self {
            q: DVector::zeros(n),
            qd: DVector::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    /// Flat `[q, q̇]` vector of length `2n`.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.dof();
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(&self.q);
        x.rows_mut(n, n).copy_from(&self.qd);
        x
    }

    /// Split a flat `[q, q̇]` vector back into a state.
    pub fn from_vector(x: &DVector<f64>) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                what: "flat state",
                expected: x.len() + 1,
                got: x.len(),
            });
        }
        let n = x.len() / 2;
        Ok(Self {
            q: x.rows(0, n).into_owned(),
            qd: x.rows(n, n).into_owned(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|v| v.is_finite()) && self.qd.iter().all(|v| v.is_finite())
    }
}

/// Commanded bellows pressures in Pa, ordered `[p_11, p_12, ..., p_n1, p_n2]`.
///
/// Each joint is driven by an antagonistic pair, so the vector has length `2n`.
/// The fast inner pressure control loop is assumed ideal, so commanded and
/// acting pressures coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Input {
    pub p_d: DVector<f64>,
}

impl Input {
    pub fn new(p_d: DVector<f64>) -> Self {
        Self { p_d }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            p_d: DVector::zeros(2 * n),
        }
    }

    /// Pressure difference `p_i1 − p_i2` per joint.
    pub fn differences(&self) -> DVector<f64> {
        let n = self.p_d.len() / 2;
        DVector::from_fn(n, |i, _| self.p_d[2 * i] - self.p_d[2 * i + 1])
    }
}

/// Operating-condition vector `δ = [m_e, β_g]`.
///
/// These are the quantities that may change after a model has been trained:
/// an extra payload attached to the last segment and a tilt of the robot base
/// against gravity. They enter the dynamics as explicit inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    /// End-effector payload, kg.
    pub payload: f64,
    /// Base tilt against gravity, rad. Zero means gravity is parallel to the
    /// chain axis of the straight robot.
    pub tilt: f64,
}

impl Domain {
    pub fn new(payload: f64, tilt: f64) -> Result<Self> {
        if !(payload >= 0.0) {
            return Err(Error::Config(format!("payload must be >= 0, got {payload}")));
        }
        Ok(Self { payload, tilt })
    }

    /// The nominal training domain: no payload, upright base.
    pub fn training() -> Self {
        Self {
            payload: 0.0,
            tilt: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_round_trips_through_flat_vector() {
        let s = State::new(
            DVector::from_vec(vec![0.1, -0.2, 0.3]),
            DVector::from_vec(vec![1.0, 2.0, -3.0]),
        )
        .unwrap();
        let back = State::from_vector(&s.to_vector()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn mismatched_state_lengths_error() {
        assert!(State::new(DVector::zeros(3), DVector::zeros(2)).is_err());
    }

    #[test]
    fn pressure_differences() {
        let u = Input::new(DVector::from_vec(vec![3.0, 1.0, 0.5, 2.0]));
        let dp = u.differences();
        assert_eq!(dp[0], 2.0);
        assert_eq!(dp[1], -1.5);
    }

    #[test]
    fn negative_payload_rejected() {
        assert!(Domain::new(-0.1, 0.0).is_err());
    }
}

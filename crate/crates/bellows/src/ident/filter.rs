//! Offline signal processing for identification: zero-phase low-pass
//! filtering and numerical differentiation.

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Second-order Butterworth low-pass coefficients via bilinear transform.
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn lowpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let c = 1.0 / (std::f64::consts::PI * cutoff_hz / rate_hz).tan();
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * c + c * c);
        Self {
            b0: norm,
            b1: 2.0 * norm,
            b2: norm,
            a1: 2.0 * norm * (1.0 - c * c),
            a2: norm * (1.0 - sqrt2 * c + c * c),
        }
    }

    /// Direct-form II transposed, states initialized for a constant input so
    /// the filter starts in steady state rather than ringing in from zero.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let first = x.first().copied().unwrap_or(0.0);
        let mut s1 = (self.b1 - self.a1) * first + (self.b2 - self.a2) * first;
        let mut s2 = (self.b2 - self.a2) * first;
        let mut y = Vec::with_capacity(x.len());
        for &v in x {
            let out = self.b0 * v + s1;
            s1 = self.b1 * v - self.a1 * out + s2;
            s2 = self.b2 * v - self.a2 * out;
            y.push(out);
        }
        y
    }
}

/// Forward-backward (zero-phase) fourth-order low-pass of one channel.
pub fn filtfilt(x: &[f64], cutoff_hz: f64, rate_hz: f64) -> Vec<f64> {
    let bq = Biquad::lowpass(cutoff_hz, rate_hz);
    let fwd = bq.run(x);
    let mut rev: Vec<f64> = fwd.into_iter().rev().collect();
    rev = bq.run(&rev);
    rev.reverse();
    rev
}

/// Filtered positions with their first and second time derivatives, valid on
/// dataset rows `offset .. offset + q.nrows()`.
pub struct Kinematics {
    pub q: DMatrix<f64>,
    pub qd: DMatrix<f64>,
    pub qdd: DMatrix<f64>,
    /// Rows trimmed from each end of the dataset.
    pub offset: usize,
}

/// Zero-phase low-pass the joint angles, then differentiate twice by central
/// differences. Edge rows inside the filter warmup are trimmed.
pub fn estimate_acceleration(dataset: &Dataset, cutoff_hz: f64) -> Result<Kinematics> {
    if dataset.rate < 50.0 {
        return Err(Error::Config(format!(
            "acceleration estimation needs >= 50 Hz data, got {} Hz",
            dataset.rate
        )));
    }
    let warmup = (dataset.rate / cutoff_hz).ceil() as usize + 2;
    let rows = dataset.len();
    if rows < 2 * warmup + 5 {
        return Err(Error::DatasetTooShort {
            need: 2 * warmup + 5,
            got: rows,
        });
    }
    let n = dataset.dof();
    let dt = 1.0 / dataset.rate;

    let mut q_f = DMatrix::zeros(rows, n);
    for c in 0..n {
        let col: Vec<f64> = (0..rows).map(|r| dataset.q[(r, c)]).collect();
        let filtered = filtfilt(&col, cutoff_hz, dataset.rate);
        for r in 0..rows {
            q_f[(r, c)] = filtered[r];
        }
    }
    let mut qd = DMatrix::zeros(rows, n);
    for c in 0..n {
        for r in 1..rows - 1 {
            qd[(r, c)] = (q_f[(r + 1, c)] - q_f[(r - 1, c)]) / (2.0 * dt);
        }
    }
    let mut qdd = DMatrix::zeros(rows, n);
    for c in 0..n {
        for r in 2..rows - 2 {
            qdd[(r, c)] = (qd[(r + 1, c)] - qd[(r - 1, c)]) / (2.0 * dt);
        }
    }

    let keep = rows - 2 * warmup;
    let slice = |m: &DMatrix<f64>| m.rows(warmup, keep).into_owned();
    Ok(Kinematics {
        q: slice(&q_f),
        qd: slice(&qd),
        qdd: slice(&qdd),
        offset: warmup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Domain;
    use nalgebra::DMatrix;

    fn dataset_from_q(q: DMatrix<f64>, rate: f64) -> Dataset {
        let rows = q.nrows();
        let n = q.ncols();
        Dataset {
            rate,
            domain: Domain::training(),
            qd: DMatrix::zeros(rows, n),
            p: DMatrix::zeros(rows, 2 * n),
            p_d: DMatrix::zeros(rows, 2 * n),
            q,
        }
    }

    #[test]
    fn constant_signal_has_zero_acceleration() {
        let q = DMatrix::from_element(500, 2, 0.3);
        let kin = estimate_acceleration(&dataset_from_q(q, 50.0), 5.0).unwrap();
        assert!(kin.qdd.abs().max() < 1e-12);
        assert!(kin.qd.abs().max() < 1e-12);
    }

    #[test]
    fn sinusoid_acceleration_amplitude_within_two_percent() {
        let rate = 50.0;
        let omega = 2.0 * std::f64::consts::PI * 1.0; // 1 Hz, well below the 5 Hz cutoff
        let amp = 0.2;
        let rows = 1000;
        let q = DMatrix::from_fn(rows, 1, |r, _| amp * (omega * r as f64 / rate).sin());
        let kin = estimate_acceleration(&dataset_from_q(q, rate), 5.0).unwrap();
        // compare in the interior against the analytic -A ω² sin(ωt)
        let m = kin.q.nrows();
        let mut max_rel: f64 = 0.0;
        for r in m / 4..3 * m / 4 {
            let t = (r + kin.offset) as f64 / rate;
            let expect = -amp * omega * omega * (omega * t).sin();
            if expect.abs() > 0.5 * amp * omega * omega {
                max_rel = max_rel.max((kin.qdd[(r, 0)] - expect).abs() / expect.abs());
            }
        }
        assert!(max_rel < 0.02, "max relative error {max_rel}");
    }

    #[test]
    fn quadratic_recovers_constant_acceleration() {
        let rate = 50.0;
        let a = 0.8;
        let rows = 600;
        let q = DMatrix::from_fn(rows, 1, |r, _| {
            let t = r as f64 / rate;
            0.5 * a * t * t
        });
        let kin = estimate_acceleration(&dataset_from_q(q, rate), 5.0).unwrap();
        let m = kin.q.nrows();
        for r in m / 4..3 * m / 4 {
            assert!(
                (kin.qdd[(r, 0)] - a).abs() / a < 0.01,
                "row {r}: {} vs {a}",
                kin.qdd[(r, 0)]
            );
        }
    }

    #[test]
    fn too_short_dataset_is_rejected() {
        let q = DMatrix::zeros(10, 1);
        assert!(matches!(
            estimate_acceleration(&dataset_from_q(q, 50.0), 5.0),
            Err(Error::DatasetTooShort { .. })
        ));
    }

    #[test]
    fn low_rate_is_rejected() {
        let q = DMatrix::zeros(1000, 1);
        assert!(estimate_acceleration(&dataset_from_q(q, 20.0), 5.0).is_err());
    }
}

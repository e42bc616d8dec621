//! Random piecewise-linear reference trajectories.

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::RngExt;

use crate::model::DEG;

/// Desired positions and velocities on the control sample grid.
#[derive(Debug, Clone)]
pub struct Reference {
    pub t_s: f64,
    pub q_d: Vec<DVector<f64>>,
    pub qd_d: Vec<DVector<f64>>,
}

impl Reference {
    pub fn len(&self) -> usize {
        self.q_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_d.is_empty()
    }

    /// Constant zero reference.
    pub fn zero(n: usize, duration: f64, t_s: f64) -> Self {
        let steps = (duration / t_s).round() as usize;
        Self {
            t_s,
            q_d: vec![DVector::zeros(n); steps],
            qd_d: vec![DVector::zeros(n); steps],
        }
    }

    /// Reference at a continuous time (previous-sample hold).
    pub fn at(&self, t: f64) -> (&DVector<f64>, &DVector<f64>) {
        let k = ((t / self.t_s) as usize).min(self.q_d.len() - 1);
        (&self.q_d[k], &self.qd_d[k])
    }

    /// A window of `m` future steps starting after sample `k`, repeating the
    /// final sample past the end.
    pub fn window(&self, k: usize, m: usize) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let pick = |i: usize| i.min(self.q_d.len() - 1);
        (
            (1..=m).map(|j| self.q_d[pick(k + j)].clone()).collect(),
            (1..=m).map(|j| self.qd_d[pick(k + j)].clone()).collect(),
        )
    }
}

/// Back-to-back linear ramps with random rise times in [0.4, 1.6] s and
/// random target amplitudes within ±18°, smoothed by a 0.2 s moving mean;
/// desired velocities are the finite differences of the smoothed positions.
pub fn generate_reference(n: usize, duration: f64, t_s: f64, rng: &mut StdRng) -> Reference {
    let steps = (duration / t_s).round() as usize;
    let amp = 18.0 * DEG;
    let mut raw = vec![DVector::zeros(n); steps];
    for j in 0..n {
        let mut k = 0usize;
        let mut level = 0.0;
        while k < steps {
            let target = rng.random_range(-amp..amp);
            let rise = rng.random_range(0.4..1.6);
            let ramp_steps = (rise / t_s).round().max(1.0) as usize;
            for s in 0..ramp_steps {
                if k >= steps {
                    break;
                }
                raw[k][j] = level + (target - level) * (s as f64 + 1.0) / ramp_steps as f64;
                k += 1;
            }
            level = target;
        }
    }
    // centered moving mean over a 0.2 s window
    let half = ((0.2 / t_s) as usize / 2).max(1);
    let mut q_d = Vec::with_capacity(steps);
    for k in 0..steps {
        let lo = k.saturating_sub(half);
        let hi = (k + half).min(steps - 1);
        let mut mean = DVector::zeros(n);
        for item in raw.iter().take(hi + 1).skip(lo) {
            mean += item;
        }
        q_d.push(mean / (hi + 1 - lo) as f64);
    }
    let mut qd_d = Vec::with_capacity(steps);
    for k in 0..steps {
        let v = if k == 0 {
            (&q_d[1] - &q_d[0]) / t_s
        } else if k == steps - 1 {
            (&q_d[k] - &q_d[k - 1]) / t_s
        } else {
            (&q_d[k + 1] - &q_d[k - 1]) / (2.0 * t_s)
        };
        qd_d.push(v);
    }
    Reference { t_s, q_d, qd_d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn amplitudes_stay_inside_the_bound() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..5 {
            let r = generate_reference(5, 30.0, 0.02, &mut rng);
            for q in &r.q_d {
                assert!(q.amax() <= 18.0 * DEG + 1e-12);
            }
        }
    }

    #[test]
    fn mean_absolute_velocity_matches_the_design_band() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..20 {
            let r = generate_reference(5, 40.0, 0.02, &mut rng);
            for qd in &r.qd_d {
                acc += qd.abs().sum();
                count += qd.len();
            }
        }
        let mean_deg = acc / count as f64 / DEG;
        assert!(
            (mean_deg - 11.7).abs() < 2.0,
            "mean |q̇_d| = {mean_deg} deg/s, expected 11.7 ± 2"
        );
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = generate_reference(3, 10.0, 0.02, &mut StdRng::seed_from_u64(9));
        let b = generate_reference(3, 10.0, 0.02, &mut StdRng::seed_from_u64(9));
        for (x, y) in a.q_d.iter().zip(&b.q_d) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn velocity_is_consistent_with_position_differences() {
        let mut rng = StdRng::seed_from_u64(3);
        let r = generate_reference(2, 8.0, 0.02, &mut rng);
        for k in 1..r.len() - 1 {
            let fd = (&r.q_d[k + 1] - &r.q_d[k - 1]) / (2.0 * r.t_s);
            assert!((r.qd_d[k].clone() - fd).abs().max() < 1e-12);
        }
    }
}

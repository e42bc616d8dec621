//! PI joint-position baseline with antagonistic pressure mapping,
//! anti-windup, and output saturation.

use nalgebra::DVector;

use crate::model::DEG;
use crate::types::Input;

#[derive(Debug, Clone)]
pub struct PiConfig {
    /// Proportional gains, Pa/rad per joint.
    pub kp: DVector<f64>,
    /// Integral gains, Pa/(rad·s) per joint.
    pub ki: DVector<f64>,
    /// Bound on the integral contribution to the pressure difference, Pa.
    pub integrator_clamp: f64,
    /// Valve saturation, Pa.
    pub p_max: f64,
}

impl PiConfig {
    /// Hand-tuned gains (stated per degree and millibar, stored in SI).
    pub fn default_gains(n: usize) -> Self {
        const KP_MBAR_DEG: [f64; 5] = [40.0, 60.0, 110.0, 110.0, 100.0];
        const KI_MBAR_DEG_S: [f64; 5] = [40.0, 40.0, 80.0, 60.0, 110.0];
        let to_si = 100.0 / DEG; // mbar/deg -> Pa/rad
        Self {
            kp: DVector::from_fn(n, |i, _| KP_MBAR_DEG[i.min(4)] * to_si),
            ki: DVector::from_fn(n, |i, _| KI_MBAR_DEG_S[i.min(4)] * to_si),
            integrator_clamp: 0.7e5,
            p_max: 0.7e5,
        }
    }
}

/// Integrator memory.
#[derive(Debug, Clone)]
pub struct PiState {
    /// Accumulated error integral per joint, rad·s.
    pub integral: DVector<f64>,
}

impl PiState {
    pub fn new(n: usize) -> Self {
        Self {
            integral: DVector::zeros(n),
        }
    }
}

/// One PI update: pressure differences from the position error, mapped onto
/// the antagonistic pair around the mid pressure, saturated to `[0, p_max]`.
/// The integrator freezes on joints whose error would deepen saturation.
pub fn pi_control(
    q_d: &DVector<f64>,
    q: &DVector<f64>,
    state: &mut PiState,
    cfg: &PiConfig,
    dt: f64,
) -> Input {
    let n = q.len();
    let p_mid = cfg.p_max / 2.0;
    let mut p = DVector::zeros(2 * n);
    for i in 0..n {
        let e = q_d[i] - q[i];
        // trial integration with clamping on the contribution
        let mut integral = state.integral[i] + e * dt;
        let mut contrib = cfg.ki[i] * integral;
        if contrib.abs() > cfg.integrator_clamp {
            contrib = contrib.signum() * cfg.integrator_clamp;
            integral = contrib / cfg.ki[i].max(1e-300);
        }
        let dp = cfg.kp[i] * e + contrib;
        let raw_hi = p_mid + dp / 2.0;
        let raw_lo = p_mid - dp / 2.0;
        let saturating = raw_hi > cfg.p_max || raw_hi < 0.0 || raw_lo > cfg.p_max || raw_lo < 0.0;
        // anti-windup: keep the old integral if we push further into the rail
        let deepens = (raw_hi > cfg.p_max || raw_lo < 0.0) && e > 0.0
            || (raw_hi < 0.0 || raw_lo > cfg.p_max) && e < 0.0;
        if !(saturating && deepens) {
            state.integral[i] = integral;
        }
        p[2 * i] = raw_hi.clamp(0.0, cfg.p_max);
        p[2 * i + 1] = raw_lo.clamp(0.0, cfg.p_max);
    }
    Input::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_commands_mid_pressure() {
        let cfg = PiConfig::default_gains(5);
        let mut state = PiState::new(5);
        let q = DVector::zeros(5);
        let u = pi_control(&q, &q, &mut state, &cfg, 1e-3);
        for v in u.p_d.iter() {
            assert!((v - 0.35e5).abs() < 1e-9);
        }
        assert!(state.integral.abs().max() == 0.0);
    }

    #[test]
    fn large_error_saturates_with_antagonist_symmetry() {
        let cfg = PiConfig::default_gains(5);
        let mut state = PiState::new(5);
        let q = DVector::zeros(5);
        let mut q_d = DVector::zeros(5);
        q_d[0] = 20.0 * DEG;
        // before saturation the pair is symmetric about the mid pressure
        let dp = cfg.kp[0] * q_d[0];
        assert!(dp > cfg.p_max); // this error drives channel 1 into the rail
        let u = pi_control(&q_d, &q, &mut state, &cfg, 1e-3);
        assert_eq!(u.p_d[0], cfg.p_max);
        assert_eq!(u.p_d[1], 0.0);
    }

    #[test]
    fn integrator_freezes_while_saturated() {
        let cfg = PiConfig::default_gains(2);
        let mut state = PiState::new(2);
        let q = DVector::zeros(2);
        let mut q_d = DVector::zeros(2);
        q_d[0] = 30.0 * DEG;
        for _ in 0..10_000 {
            pi_control(&q_d, &q, &mut state, &cfg, 1e-3);
        }
        // the error never integrates while the output is pinned at the rail
        assert_eq!(state.integral[0], 0.0);
        // joint 2 is unsaturated and integrates freely but stays clamped
        q_d[0] = 0.0;
        q_d[1] = 1.0 * DEG;
        for _ in 0..2_000_000 {
            pi_control(&q_d, &q, &mut state, &cfg, 1e-3);
        }
        assert!(cfg.ki[1] * state.integral[1] <= cfg.integrator_clamp + 1e-9);
    }
}

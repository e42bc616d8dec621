//! Closed-loop simulation: controller and fine-step plant in lockstep.
//!
//! The MPC update period follows the measured solve time, floored at the
//! model sample time, so the reported control rate reflects what this
//! implementation actually achieves. The PI baseline runs at 1 kHz.

use nalgebra::DVector;
use std::time::Instant;

use crate::control::mpc::{mpc_solve, MpcConfig, RefWindow};
use crate::control::pi::{pi_control, PiConfig, PiState};
use crate::control::reference::Reference;
use crate::error::Result;
use crate::integrate::{FpSystem, Scheme, Stepper, ORACLE_STEP};
use crate::model::{RobotModel, DEG};
use crate::net::surrogate::SurrogateModel;
use crate::types::{Domain, State};

pub enum Controller<'a> {
    Mpc {
        surrogate: &'a SurrogateModel,
        config: MpcConfig,
    },
    Pi {
        config: PiConfig,
    },
}

#[derive(Debug, Clone)]
pub struct ClosedLoopLog {
    pub t: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub q_d: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    /// Controller computation time per cycle, ms (zero for PI).
    pub solve_ms: Vec<f64>,
    /// Mean absolute tracking error over joints and samples, rad.
    pub mae_q: f64,
    /// Mean controller update rate, Hz.
    pub mean_rate_hz: f64,
}

impl ClosedLoopLog {
    pub fn to_csv(&self) -> String {
        let n = self.q.first().map_or(0, |q| q.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",q{i}_deg"));
        }
        for i in 1..=n {
            out.push_str(&format!(",qd{i}_deg"));
        }
        for i in 1..=2 * n {
            out.push_str(&format!(",u{i}_bar"));
        }
        out.push_str(",solve_ms\n");
        for k in 0..self.t.len() {
            out.push_str(&format!("{}", self.t[k]));
            for v in self.q[k].iter() {
                out.push_str(&format!(",{}", v / DEG));
            }
            for v in self.q_d[k].iter() {
                out.push_str(&format!(",{}", v / DEG));
            }
            for v in self.u[k].iter() {
                out.push_str(&format!(",{}", v / 1e5));
            }
            out.push_str(&format!(",{}\n", self.solve_ms[k]));
        }
        out
    }
}

/// Advance the plant by `dt` with oracle-grade micro-steps.
fn advance_plant(
    sys: &mut FpSystem,
    stepper: &mut Stepper,
    x: &mut [f64],
    u: &[f64],
    dt: f64,
) -> Result<()> {
    let steps = (dt / ORACLE_STEP).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    for _ in 0..steps {
        stepper.step(Scheme::Rk4, sys, x, u, h)?;
    }
    Ok(())
}

/// Run one tracking experiment and report the log with its error metrics.
pub fn closed_loop(
    robot: &RobotModel,
    controller: &Controller,
    reference: &Reference,
    domain: &Domain,
    duration: f64,
) -> Result<ClosedLoopLog> {
    let n = robot.n;
    let mut sys = FpSystem::new(robot, *domain);
    let mut stepper = Stepper::new(2 * n);
    let mut x = vec![0.0; 2 * n];
    let mut log = ClosedLoopLog {
        t: Vec::new(),
        q: Vec::new(),
        q_d: Vec::new(),
        u: Vec::new(),
        solve_ms: Vec::new(),
        mae_q: 0.0,
        mean_rate_hz: 0.0,
    };

    match controller {
        Controller::Mpc { surrogate, config } => {
            let t_s = surrogate.t_s;
            let d_s = surrogate.scaler.scale_domain(domain);
            let mut warm: Option<DVector<f64>> = None;
            let mut t = 0.0;
            while t < duration {
                let state = State::from_vector(&DVector::from_row_slice(&x))?;
                let x_s = surrogate.scaler.scale_state(&state);
                let k = (t / reference.t_s) as usize;
                let (q_w, qd_w) = reference.window(k, config.horizon);
                let window = RefWindow {
                    q_d: q_w
                        .iter()
                        .map(|q| scale_q(surrogate, q))
                        .collect(),
                    qd_d: qd_w
                        .iter()
                        .map(|qd| scale_qd(surrogate, qd))
                        .collect(),
                };
                let wall = Instant::now();
                let sol = mpc_solve(&x_s, &window, &d_s, surrogate, config, warm.as_ref())?;
                let solve_s = wall.elapsed().as_secs_f64();
                let u_phys = surrogate.scaler.unscale_input(&sol.u);
                let (q_ref, _) = reference.at(t);
                log.t.push(t);
                log.q.push(state.q.clone());
                log.q_d.push(q_ref.clone());
                log.u.push(u_phys.p_d.clone());
                log.solve_ms.push(solve_s * 1e3);
                warm = Some(sol.u);

                let cycle = solve_s.max(t_s);
                advance_plant(&mut sys, &mut stepper, &mut x, u_phys.p_d.as_slice(), cycle)?;
                t += cycle;
            }
        }
        Controller::Pi { config } => {
            let dt = 1e-3;
            let mut state = PiState::new(n);
            let steps = (duration / dt).round() as usize;
            for k in 0..steps {
                let t = k as f64 * dt;
                let q = DVector::from_row_slice(&x[..n]);
                let (q_ref, _) = reference.at(t);
                let u = pi_control(q_ref, &q, &mut state, config, dt);
                log.t.push(t);
                log.q.push(q);
                log.q_d.push(q_ref.clone());
                log.u.push(u.p_d.clone());
                log.solve_ms.push(0.0);
                advance_plant(&mut sys, &mut stepper, &mut x, u.p_d.as_slice(), dt)?;
            }
        }
    }

    // metrics
    let mut acc = 0.0;
    let mut count = 0usize;
    for (q, q_d) in log.q.iter().zip(&log.q_d) {
        acc += (q - q_d).abs().sum();
        count += q.len();
    }
    log.mae_q = acc / count.max(1) as f64;
    if log.t.len() > 1 {
        let span = log.t.last().unwrap() - log.t[0];
        log.mean_rate_hz = (log.t.len() - 1) as f64 / span;
    }
    Ok(log)
}

fn scale_q(surrogate: &SurrogateModel, q: &DVector<f64>) -> DVector<f64> {
    let state = State {
        q: q.clone(),
        qd: DVector::zeros(q.len()),
    };
    let s = surrogate.scaler.scale_state(&state);
    s.rows(0, q.len()).into_owned()
}

fn scale_qd(surrogate: &SurrogateModel, qd: &DVector<f64>) -> DVector<f64> {
    let state = State {
        q: DVector::zeros(qd.len()),
        qd: qd.clone(),
    };
    let s = surrogate.scaler.scale_state(&state);
    s.rows(qd.len(), qd.len()).into_owned()
}

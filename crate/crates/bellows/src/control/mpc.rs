//! Nonlinear MPC over the one-step surrogate with control horizon one.
//!
//! The optimizer searches a single input vector held constant over the
//! prediction horizon, so the problem is a low-dimensional box-constrained
//! minimization. A projected L-BFGS descent on the analytic rollout gradient
//! solves it in a handful of iterations.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::net::surrogate::SurrogateModel;

#[derive(Debug, Clone, Copy)]
pub struct MpcConfig {
    /// Prediction steps m.
    pub horizon: usize,
    /// Stage and terminal weights on positions and velocities, plus the
    /// input weight, all on scaled (unitless) quantities.
    pub q_stage_pos: f64,
    pub q_stage_vel: f64,
    pub q_term_pos: f64,
    pub q_term_vel: f64,
    pub r_input: f64,
    /// Scaled input box.
    pub u_min: f64,
    pub u_max: f64,
    pub max_iters: usize,
    /// Convergence tolerance on the projected gradient norm.
    pub grad_tol: f64,
    /// Verify the analytic gradient against finite differences at every
    /// iteration (test/debug runs).
    pub check_gradients: bool,
}

impl MpcConfig {
    /// Paper-tuned weights with the box derived from the physical pressure
    /// range `[0, p_max]` under the surrogate's scaler.
    pub fn default_for(surrogate: &SurrogateModel, p_max: f64) -> Self {
        let zero = crate::types::Input::new(DVector::zeros(2 * surrogate.n));
        let full = crate::types::Input::new(DVector::from_element(2 * surrogate.n, p_max));
        let lo = surrogate.scaler.scale_input(&zero)[0];
        let hi = surrogate.scaler.scale_input(&full)[0];
        Self {
            horizon: 3,
            q_stage_pos: 0.7,
            q_stage_vel: 0.01,
            q_term_pos: 0.7,
            q_term_vel: 0.01,
            r_input: 0.01,
            u_min: lo,
            u_max: hi,
            max_iters: 30,
            grad_tol: 1e-6,
            check_gradients: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.u_min >= self.u_max {
            return Err(Error::Config("input box is empty".into()));
        }
        let weights = [
            self.q_stage_pos,
            self.q_stage_vel,
            self.q_term_pos,
            self.q_term_vel,
            self.r_input,
        ];
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Scaled reference window of `m` steps: desired positions and velocities at
/// prediction steps `1..=m`.
#[derive(Debug, Clone)]
pub struct RefWindow {
    pub q_d: Vec<DVector<f64>>,
    pub qd_d: Vec<DVector<f64>>,
}

/// Cost of holding `u0` over the horizon and its gradient with respect to
/// `u0`, both in scaled units.
pub fn mpc_cost(
    u0: &DVector<f64>,
    x0_s: &DVector<f64>,
    window: &RefWindow,
    d_s: &[f64; 2],
    surrogate: &SurrogateModel,
    cfg: &MpcConfig,
) -> Result<(f64, DVector<f64>)> {
    let m = cfg.horizon;
    debug_assert_eq!(window.q_d.len(), m);
    let n = surrogate.n;

    // forward rollout under the constant input
    let mut xs = Vec::with_capacity(m + 1);
    xs.push(x0_s.clone());
    for k in 0..m {
        let next = surrogate.predict_scaled(surrogate.t_s, &xs[k], u0, d_s)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "mpc rollout",
            });
        }
        xs.push(next);
    }

    let stage_err = |k: usize| -> (DVector<f64>, DVector<f64>) {
        let eq = xs[k].rows(0, n) - &window.q_d[k - 1];
        let eqd = xs[k].rows(n, n) - &window.qd_d[k - 1];
        (eq, eqd)
    };

    let mut cost = m as f64 * cfg.r_input * u0.norm_squared();
    for k in 1..m {
        let (eq, eqd) = stage_err(k);
        cost += cfg.q_stage_pos * eq.norm_squared() + cfg.q_stage_vel * eqd.norm_squared();
    }
    {
        let (eq, eqd) = stage_err(m);
        cost += cfg.q_term_pos * eq.norm_squared() + cfg.q_term_vel * eqd.norm_squared();
    }

    // reverse sweep: adjoint on states, accumulating input cotangents
    let mut grad_u = u0 * (2.0 * m as f64 * cfg.r_input);
    let cotangent_at = |k: usize| -> DVector<f64> {
        let (wq, wqd) = if k == m {
            (cfg.q_term_pos, cfg.q_term_vel)
        } else {
            (cfg.q_stage_pos, cfg.q_stage_vel)
        };
        let (eq, eqd) = stage_err(k);
        let mut lam = DVector::zeros(2 * n);
        lam.rows_mut(0, n).copy_from(&(eq * (2.0 * wq)));
        lam.rows_mut(n, n).copy_from(&(eqd * (2.0 * wqd)));
        lam
    };
    let mut lambda = cotangent_at(m);
    for k in (0..m).rev() {
        let (gx, gu) = surrogate.step_vjp_scaled(&xs[k], u0, d_s, &lambda)?;
        grad_u += gu;
        lambda = gx;
        if k >= 1 {
            lambda += cotangent_at(k);
        }
    }
    Ok((cost, grad_u))
}

#[derive(Debug, Clone)]
pub struct MpcSolution {
    /// Optimized scaled input.
    pub u: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// False when the solver could not improve on the warm start.
    pub improved: bool,
    pub projected_grad_norm: f64,
}

fn project(mut u: DVector<f64>, cfg: &MpcConfig) -> DVector<f64> {
    u.apply(|v| *v = v.clamp(cfg.u_min, cfg.u_max));
    u
}

/// Box-projected L-BFGS descent on [`mpc_cost`], warm-started.
pub fn mpc_solve(
    x0_s: &DVector<f64>,
    window: &RefWindow,
    d_s: &[f64; 2],
    surrogate: &SurrogateModel,
    cfg: &MpcConfig,
    warm_start: Option<&DVector<f64>>,
) -> Result<MpcSolution> {
    cfg.validate()?;
    let dim = 2 * surrogate.n;
    let mid = 0.5 * (cfg.u_min + cfg.u_max);
    let mut u = project(
        warm_start
            .cloned()
            .unwrap_or_else(|| DVector::from_element(dim, mid)),
        cfg,
    );
    let (mut f, mut g) = mpc_cost(&u, x0_s, window, d_s, surrogate, cfg)?;
    let warm_cost = f;
    let mut best = (f, u.clone());

    // limited-memory curvature pairs
    let mut pairs: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    let mut pg_norm = (u.clone() - project(&u - &g, cfg)).norm();

    for _ in 0..cfg.max_iters {
        if cfg.check_gradients {
            debug_check_gradient(&u, x0_s, window, d_s, surrogate, cfg, &g)?;
        }
        if pg_norm <= cfg.grad_tol {
            break;
        }
        iterations += 1;

        // two-loop recursion
        let mut d = -g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * s.dot(&d);
            d -= y * a;
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.last() {
            let gamma = s.dot(y) / y.dot(y).max(1e-300);
            d *= gamma;
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&d);
            d += s * (a - b);
        }
        if d.dot(&g) >= 0.0 {
            d = -g.clone();
        }

        // backtracking along the projected arc
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let cand = project(&u + &d * step, cfg);
            let delta = &cand - &u;
            if delta.norm() < 1e-15 {
                break;
            }
            let (fc, gc) = mpc_cost(&cand, x0_s, window, d_s, surrogate, cfg)?;
            if fc <= f + 1e-4 * g.dot(&delta) {
                let s = delta;
                let y = &gc - &g;
                let sy = s.dot(&y);
                if sy > 1e-12 {
                    if pairs.len() == 5 {
                        pairs.remove(0);
                    }
                    let rho = 1.0 / sy;
                    pairs.push((s, y, rho));
                }
                u = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if f < best.0 {
            best = (f, u.clone());
        }
        if !accepted {
            break;
        }
        pg_norm = (u.clone() - project(&u - &g, cfg)).norm();
    }

    Ok(MpcSolution {
        improved: best.0 < warm_cost - 1e-15 || iterations == 0,
        u: best.1,
        cost: best.0,
        iterations,
        projected_grad_norm: pg_norm,
    })
}

fn debug_check_gradient(
    u: &DVector<f64>,
    x0_s: &DVector<f64>,
    window: &RefWindow,
    d_s: &[f64; 2],
    surrogate: &SurrogateModel,
    cfg: &MpcConfig,
    g: &DVector<f64>,
) -> Result<()> {
    let h = 1e-6;
    for i in 0..u.len() {
        let mut up = u.clone();
        let mut um = u.clone();
        up[i] += h;
        um[i] -= h;
        let fp = mpc_cost(&up, x0_s, window, d_s, surrogate, cfg)?.0;
        let fm = mpc_cost(&um, x0_s, window, d_s, surrogate, cfg)?.0;
        let fd = (fp - fm) / (2.0 * h);
        let denom = g[i].abs().max(fd.abs()).max(1e-4);
        if (g[i] - fd).abs() / denom > 1e-5 {
            return Err(Error::Config(format!(
                "mpc gradient check failed on channel {i}: {} vs {fd}",
                g[i]
            )));
        }
    }
    Ok(())
}

//! One-step surrogate of the plant: scaler + feedforward core + head.
//!
//! Two heads are supported. The direct head maps `(t, x0, u0, δ)` straight to
//! the predicted state and must *learn* its initial condition. The ansatz
//! head decouples time from the network: the core maps `(x0, u0, δ)` to the
//! coefficients of a damped-harmonic ansatz added onto `x0`, which pins the
//! initial condition structurally and gives the time derivative in closed
//! form.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::net::ansatz::{ansatz_dt, ansatz_eval, ansatz_grad_alpha};
use crate::net::mlp::Mlp;
use crate::net::scaler::{Boundaries, Scaler};
use crate::types::{Domain, Input, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Direct state prediction; time is a network input.
    Pinc,
    /// Ansatz-coefficient prediction with `n_a` damped-harmonic terms.
    DdPinn { n_a: usize },
}

impl Head {
    pub fn is_structural_ic(&self) -> bool {
        matches!(self, Head::DdPinn { .. })
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub scaler: Scaler,
    pub core: Mlp,
    pub head: Head,
    /// Macro sample time the model is trained for, s.
    pub t_s: f64,
    pub boundaries: Boundaries,
    pub n: usize,
}

impl SurrogateModel {
    pub fn input_dim(n: usize, head: Head) -> usize {
        match head {
            Head::Pinc => 1 + 4 * n + 2,
            Head::DdPinn { .. } => 4 * n + 2,
        }
    }

    pub fn output_dim(n: usize, head: Head) -> usize {
        match head {
            Head::Pinc => 2 * n,
            Head::DdPinn { n_a } => 4 * 2 * n * n_a,
        }
    }

    /// Fresh Xavier-initialized model with `n_h` hidden layers of `n_n`
    /// neurons.
    pub fn new(
        n: usize,
        t_s: f64,
        boundaries: Boundaries,
        head: Head,
        n_h: usize,
        n_n: usize,
        rng: &mut StdRng,
    ) -> Self {
        let mut sizes = vec![Self::input_dim(n, head)];
        sizes.extend(std::iter::repeat(n_n).take(n_h));
        sizes.push(Self::output_dim(n, head));
        Self {
            scaler: Scaler::new(n, t_s, &boundaries),
            core: Mlp::xavier(&sizes, rng),
            head,
            t_s,
            boundaries,
            n,
        }
    }

    /// Normalized ansatz time in [0, 1] over the trained span.
    #[inline]
    pub fn time_norm(&self, t: f64) -> f64 {
        t / self.scaler.time_span()
    }

    fn stack_input(&self, t_s: Option<f64>, x_s: &DVector<f64>, u_s: &DVector<f64>, d_s: &[f64; 2]) -> DVector<f64> {
        let extra = if t_s.is_some() { 3 } else { 2 };
        let mut v = DVector::zeros(4 * self.n + extra);
        let mut idx = 0;
        if let Some(t) = t_s {
            v[0] = t;
            idx = 1;
        }
        v.rows_mut(idx, 2 * self.n).copy_from(x_s);
        v.rows_mut(idx + 2 * self.n, 2 * self.n).copy_from(u_s);
        v[idx + 4 * self.n] = d_s[0];
        v[idx + 4 * self.n + 1] = d_s[1];
        v
    }

    /// One-step prediction in scaled coordinates at physical time `t`.
    pub fn predict_scaled(
        &self,
        t: f64,
        x_s: &DVector<f64>,
        u_s: &DVector<f64>,
        d_s: &[f64; 2],
    ) -> Result<DVector<f64>> {
        match self.head {
            Head::Pinc => {
                let input = self.stack_input(Some(self.scaler.scale_time(t)), x_s, u_s, d_s);
                self.core.forward_vec(&input)
            }
            Head::DdPinn { n_a } => {
                let input = self.stack_input(None, x_s, u_s, d_s);
                let alpha = self.core.forward_vec(&input)?;
                let mut add = vec![0.0; 2 * self.n];
                ansatz_eval(alpha.as_slice(), n_a, 2 * self.n, self.time_norm(t), &mut add);
                Ok(DVector::from_fn(2 * self.n, |i, _| x_s[i] + add[i]))
            }
        }
    }

    /// Predicted state `x̂(t)` in physical units.
    pub fn predict(&self, t: f64, x0: &State, u0: &Input, delta: &Domain) -> Result<State> {
        let x_s = self.scaler.scale_state(x0);
        let u_s = self.scaler.scale_input(u0);
        let d_s = self.scaler.scale_domain(delta);
        let out = self.predict_scaled(t, &x_s, &u_s, &d_s)?;
        self.scaler.unscale_state(&out)
    }

    /// Scaled-space time derivative `∂x̂_s/∂t_norm` at normalized time, the
    /// quantity the physics residual is written in.
    pub fn predict_dt_scaled(
        &self,
        t: f64,
        x_s: &DVector<f64>,
        u_s: &DVector<f64>,
        d_s: &[f64; 2],
    ) -> Result<DVector<f64>> {
        match self.head {
            Head::Pinc => {
                let input = self.stack_input(Some(self.scaler.scale_time(t)), x_s, u_s, d_s);
                let m = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
                let mut dir = DMatrix::zeros(input.len(), 1);
                dir[(0, 0)] = 1.0;
                let (_, tan, _) = self.core.forward_with_tangent(&m, &dir)?;
                // d t_scaled / d t_norm = 2 (both span the same interval)
                Ok(tan.column(0) * 2.0)
            }
            Head::DdPinn { n_a } => {
                let input = self.stack_input(None, x_s, u_s, d_s);
                let alpha = self.core.forward_vec(&input)?;
                let mut dt = vec![0.0; 2 * self.n];
                ansatz_dt(alpha.as_slice(), n_a, 2 * self.n, self.time_norm(t), &mut dt);
                Ok(DVector::from_vec(dt))
            }
        }
    }

    /// Physical-unit time derivative `∂x̂/∂t`.
    pub fn predict_dt(&self, t: f64, x0: &State, u0: &Input, delta: &Domain) -> Result<DVector<f64>> {
        let x_s = self.scaler.scale_state(x0);
        let u_s = self.scaler.scale_input(u0);
        let d_s = self.scaler.scale_domain(delta);
        let d_scaled = self.predict_dt_scaled(t, &x_s, &u_s, &d_s)?;
        let factors = self.scaler.state_factors();
        let span = self.scaler.time_span();
        Ok(DVector::from_fn(2 * self.n, |i, _| {
            d_scaled[i] / span / factors[i]
        }))
    }

    /// Recursive self-loop prediction on the `T_s` grid; the result has
    /// `u_traj.len() + 1` states.
    pub fn self_loop_rollout(
        &self,
        x0: &State,
        u_traj: &[Input],
        delta: &Domain,
    ) -> Result<Trajectory> {
        if u_traj.is_empty() {
            return Err(Error::Config("self-loop needs at least one input".into()));
        }
        let d_s = self.scaler.scale_domain(delta);
        let mut x_s = self.scaler.scale_state(x0);
        let mut states = Vec::with_capacity(u_traj.len() + 1);
        states.push(x0.clone());
        for (k, u) in u_traj.iter().enumerate() {
            let u_s = self.scaler.scale_input(u);
            x_s = self.predict_scaled(self.t_s, &x_s, &u_s, &d_s)?;
            if x_s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    step: k,
                    what: "surrogate self-loop produced a non-finite state".into(),
                });
            }
            states.push(self.scaler.unscale_state(&x_s)?);
        }
        Ok(Trajectory {
            t_s: self.t_s,
            states,
        })
    }

    /// Vector-Jacobian product of one scaled step at `t = T_s`: given a
    /// cotangent on the predicted state, returns gradients with respect to
    /// the scaled initial state and input. This is what a rollout-based
    /// optimizer needs.
    pub fn step_vjp_scaled(
        &self,
        x_s: &DVector<f64>,
        u_s: &DVector<f64>,
        d_s: &[f64; 2],
        cotan: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let n2 = 2 * self.n;
        match self.head {
            Head::Pinc => {
                let input = self.stack_input(Some(self.scaler.scale_time(self.t_s)), x_s, u_s, d_s);
                let m = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
                let (_, cache) = self.core.forward(&m)?;
                let g_out = DMatrix::from_column_slice(n2, 1, cotan.as_slice());
                let (_, g_in) = self.core.backward(&cache, &g_out);
                Ok((
                    g_in.column(0).rows(1, n2).into_owned(),
                    g_in.column(0).rows(1 + n2, n2).into_owned(),
                ))
            }
            Head::DdPinn { n_a } => {
                let input = self.stack_input(None, x_s, u_s, d_s);
                let m = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
                let (alpha, cache) = self.core.forward(&m)?;
                let t_n = self.time_norm(self.t_s);
                let mut alpha_bar = vec![0.0; alpha.nrows()];
                ansatz_grad_alpha(
                    alpha.column(0).as_slice(),
                    n_a,
                    n2,
                    t_n,
                    cotan.as_slice(),
                    &mut alpha_bar,
                );
                let g_out = DMatrix::from_column_slice(alpha.nrows(), 1, &alpha_bar);
                let (_, g_in) = self.core.backward(&cache, &g_out);
                let mut g_x = g_in.column(0).rows(0, n2).into_owned();
                g_x += cotan; // identity path x̂ = x0 + a(α, t)
                Ok((g_x, g_in.column(0).rows(n2, n2).into_owned()))
            }
        }
    }
}

//! Fixed-step explicit integration of the stiff state-space model.
//!
//! The Coulomb-friction term makes the plant ODE stiff: explicit Euler needs
//! roughly 20 µs steps and classical RK4 100 µs steps to stay bounded. A
//! fine-step RK4 rollout at 5 µs serves as the ground-truth oracle wherever a
//! reference solution is needed; halving its step changes trajectories by
//! less than 1e-4 degrees.

use nalgebra::DVector;

use crate::dynamics::Scratch;
use crate::error::{Error, Result};
use crate::model::RobotModel;
use crate::types::{Domain, Input, State};

/// Fixed micro-step of the ground-truth oracle, seconds.
pub const ORACLE_STEP: f64 = 5e-6;

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

/// How to advance the plant by one macro sample time `T_s`.
#[derive(Debug, Clone, Copy)]
pub struct RolloutConfig {
    /// Macro sample time, s.
    pub t_s: f64,
    /// Micro-steps per macro step.
    pub substeps: usize,
    pub scheme: Scheme,
}

impl RolloutConfig {
    pub fn new(scheme: Scheme, t_s: f64, substeps: usize) -> Result<Self> {
        if !(t_s > 0.0) || substeps == 0 {
            return Err(Error::Config(format!(
                "rollout needs t_s > 0 and substeps >= 1, got {t_s}, {substeps}"
            )));
        }
        Ok(Self { t_s, substeps, scheme })
    }

    /// Euler at 20 µs micro-steps for the default 20 ms sample time.
    pub fn euler_default() -> Self {
        Self { t_s: 0.02, substeps: 1000, scheme: Scheme::Euler }
    }

    /// RK4 at 100 µs micro-steps for the default 20 ms sample time.
    pub fn rk4_default() -> Self {
        Self { t_s: 0.02, substeps: 200, scheme: Scheme::Rk4 }
    }

    /// Ground-truth configuration: RK4 at 5 µs micro-steps.
    pub fn oracle(t_s: f64) -> Self {
        let substeps = (t_s / ORACLE_STEP).round().max(1.0) as usize;
        Self { t_s, substeps, scheme: Scheme::Rk4 }
    }

    pub fn h_step(&self) -> f64 {
        self.t_s / self.substeps as f64
    }
}

/// Right-hand side of an ODE `ẋ = f(x, u)` over flat state slices.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn derivative(&mut self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()>;
}

/// The robot model bound to one domain, ready for integration.
pub struct FpSystem<'a> {
    pub model: &'a RobotModel,
    pub domain: Domain,
    ws: Scratch,
}

impl<'a> FpSystem<'a> {
    pub fn new(model: &'a RobotModel, domain: Domain) -> Self {
        Self { model, domain, ws: Scratch::new(model) }
    }
}

impl OdeSystem for FpSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.model.n
    }

    fn derivative(&mut self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        self.model
            .state_derivative_into(&mut self.ws, x, u, &self.domain, out)
    }
}

/// Reusable stage buffers for one integrator instance.
pub struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    xt: Vec<f64>,
}

impl Stepper {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            xt: vec![0.0; dim],
        }
    }

    /// One explicit step of size `h` with the input held constant,
    /// updating `x` in place.
    pub fn step<S: OdeSystem>(
        &mut self,
        scheme: Scheme,
        sys: &mut S,
        x: &mut [f64],
        u: &[f64],
        h: f64,
    ) -> Result<()> {
        let dim = x.len();
        match scheme {
            Scheme::Euler => {
                sys.derivative(x, u, &mut self.k1)?;
                for i in 0..dim {
                    x[i] += h * self.k1[i];
                }
            }
            Scheme::Rk4 => {
                sys.derivative(x, u, &mut self.k1)?;
                for i in 0..dim {
                    self.xt[i] = x[i] + 0.5 * h * self.k1[i];
                }
                sys.derivative(&self.xt, u, &mut self.k2)?;
                for i in 0..dim {
                    self.xt[i] = x[i] + 0.5 * h * self.k2[i];
                }
                sys.derivative(&self.xt, u, &mut self.k3)?;
                for i in 0..dim {
                    self.xt[i] = x[i] + h * self.k3[i];
                }
                sys.derivative(&self.xt, u, &mut self.k4)?;
                let w = h / 6.0;
                for i in 0..dim {
                    x[i] += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
                }
            }
        }
        Ok(())
    }
}

/// One macro step `T_s` of the robot model under zero-order-hold input.
pub fn step(
    scheme: Scheme,
    model: &RobotModel,
    state: &State,
    input: &Input,
    domain: &Domain,
    h_step: f64,
    substeps: usize,
) -> Result<State> {
    let mut sys = FpSystem::new(model, *domain);
    let mut stepper = Stepper::new(sys.dim());
    let mut x = state.to_vector().as_slice().to_vec();
    for _ in 0..substeps {
        stepper.step(scheme, &mut sys, &mut x, input.p_d.as_slice(), h_step)?;
    }
    let x = DVector::from_vec(x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "integration step" });
    }
    State::from_vector(&x)
}

/// Trajectory on the macro time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t_s: f64,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.t_s
    }
}

fn check_divergence(x: &[f64], step_idx: usize) -> Result<()> {
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                step: step_idx,
                what: format!("state component {i} = {v}"),
            });
        }
    }
    Ok(())
}

/// Roll the system over the input sequence with zero-order hold per macro
/// step. The returned trajectory has `u_traj.len() + 1` states.
pub fn rollout<S: OdeSystem>(
    config: &RolloutConfig,
    sys: &mut S,
    x0: &State,
    u_traj: &[Input],
) -> Result<Trajectory> {
    if u_traj.is_empty() {
        return Err(Error::Config("rollout needs at least one input".into()));
    }
    let dim = sys.dim();
    let mut stepper = Stepper::new(dim);
    let mut x = x0.to_vector().as_slice().to_vec();
    let h = config.h_step();
    let mut states = Vec::with_capacity(u_traj.len() + 1);
    states.push(x0.clone());
    for (k, u) in u_traj.iter().enumerate() {
        for _ in 0..config.substeps {
            stepper.step(config.scheme, sys, &mut x, u.p_d.as_slice(), h)?;
        }
        check_divergence(&x, k)?;
        states.push(State::from_vector(&DVector::from_row_slice(&x))?);
    }
    Ok(Trajectory { t_s: config.t_s, states })
}

/// Convenience rollout of the robot model itself.
pub fn rollout_fp(
    config: &RolloutConfig,
    model: &RobotModel,
    domain: &Domain,
    x0: &State,
    u_traj: &[Input],
) -> Result<Trajectory> {
    let mut sys = FpSystem::new(model, *domain);
    rollout(config, &mut sys, x0, u_traj)
}

/// Ground-truth rollout: RK4 at the fixed 5 µs oracle step.
pub fn oracle_rollout(
    model: &RobotModel,
    domain: &Domain,
    x0: &State,
    u_traj: &[Input],
    t_s: f64,
) -> Result<Trajectory> {
    rollout_fp(&RolloutConfig::oracle(t_s), model, domain, x0, u_traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DEG;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    struct ZeroSystem(usize);
    impl OdeSystem for ZeroSystem {
        fn dim(&self) -> usize {
            self.0
        }
        fn derivative(&mut self, _x: &[f64], _u: &[f64], out: &mut [f64]) -> Result<()> {
            out.fill(0.0);
            Ok(())
        }
    }

    struct LinearSystem {
        a: f64,
    }
    impl OdeSystem for LinearSystem {
        fn dim(&self) -> usize {
            1
        }
        fn derivative(&mut self, x: &[f64], _u: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = self.a * x[0];
            Ok(())
        }
    }

    #[test]
    fn zero_dynamics_leaves_state_unchanged() {
        let mut sys = ZeroSystem(4);
        let mut stepper = Stepper::new(4);
        let mut x = vec![1.0, -2.0, 3.0, 0.5];
        let x0 = x.clone();
        for _ in 0..100 {
            stepper.step(Scheme::Rk4, &mut sys, &mut x, &[], 0.01).unwrap();
            stepper.step(Scheme::Euler, &mut sys, &mut x, &[], 0.01).unwrap();
        }
        assert_eq!(x, x0);
    }

    #[test]
    fn rk4_single_step_matches_exponential_to_fifth_order() {
        let mut sys = LinearSystem { a: 1.0 };
        let mut stepper = Stepper::new(1);
        let h = 0.1;
        let mut x = vec![1.0];
        stepper.step(Scheme::Rk4, &mut sys, &mut x, &[], h).unwrap();
        assert!((x[0] - h.exp()).abs() < h.powi(5));
    }

    #[test]
    fn global_error_orders_on_linear_system() {
        // integrate ẋ = -x over [0, 1] and estimate the convergence order
        let order = |scheme: Scheme, h: f64| -> f64 {
            let mut sys = LinearSystem { a: -1.0 };
            let mut stepper = Stepper::new(1);
            let mut x = vec![1.0];
            let steps = (1.0 / h).round() as usize;
            for _ in 0..steps {
                stepper.step(scheme, &mut sys, &mut x, &[], h).unwrap();
            }
            (x[0] - (-1.0_f64).exp()).abs()
        };
        for (scheme, expect) in [(Scheme::Euler, 1.0), (Scheme::Rk4, 4.0)] {
            let e1 = order(scheme, 0.02);
            let e2 = order(scheme, 0.01);
            let slope = (e1 / e2).log2();
            assert!(
                (slope - expect).abs() < 0.3,
                "{scheme:?}: slope {slope}, expected {expect}"
            );
        }
    }

    #[test]
    fn rollout_of_zero_dynamics_is_constant() {
        let model = RobotModel::default_5dof();
        let mut sys = ZeroSystem(10);
        let x0 = State::zeros(5);
        let u = vec![Input::zeros(5); 10];
        let cfg = RolloutConfig::new(Scheme::Euler, 0.02, 4).unwrap();
        let traj = rollout(&cfg, &mut sys, &x0, &u).unwrap();
        assert_eq!(traj.states.len(), 11);
        for s in &traj.states {
            assert_eq!(s, &x0);
        }
        // oracle variant as well
        let traj = oracle_rollout(&model, &Domain::training(), &x0, &u[..2], 0.02).unwrap();
        for s in &traj.states {
            assert!((s.q.abs().max()) == 0.0 && s.qd.abs().max() == 0.0);
        }
    }

    #[test]
    fn empty_input_sequence_is_rejected() {
        let mut sys = ZeroSystem(2);
        let x0 = State::zeros(1);
        let cfg = RolloutConfig::new(Scheme::Euler, 0.02, 1).unwrap();
        assert!(rollout(&cfg, &mut sys, &x0, &[]).is_err());
    }

    #[test]
    fn conservative_rollout_is_time_reversible() {
        let mut model = RobotModel::default_5dof();
        model.viscous.fill(0.0);
        model.coulomb.fill(0.0);
        model.contact_damping = 0.0;
        let dom = Domain::training();
        let x0 = State::new(
            DVector::from_vec(vec![0.05, -0.04, 0.06, 0.02, -0.03]),
            DVector::from_vec(vec![0.1, -0.2, 0.15, 0.0, 0.1]),
        )
        .unwrap();
        let u = vec![Input::zeros(5); 5];
        let cfg = RolloutConfig::new(Scheme::Rk4, 0.02, 2000).unwrap();
        let fwd = rollout_fp(&cfg, &model, &dom, &x0, &u).unwrap();
        let end = fwd.states.last().unwrap();
        let back0 = State::new(end.q.clone(), -end.qd.clone()).unwrap();
        let bwd = rollout_fp(&cfg, &model, &dom, &back0, &u).unwrap();
        let ret = bwd.states.last().unwrap();
        assert!((ret.q.clone() - &x0.q).abs().max() < 1e-3);
        assert!((ret.qd.clone() + &x0.qd).abs().max() < 1e-3);
    }

    #[test]
    fn euler_20us_matches_oracle_over_one_sample() {
        let model = RobotModel::default_5dof();
        let dom = Domain::new(0.1, 0.8).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        let x0 = State::new(
            DVector::from_fn(5, |_, _| rng.random_range(-8.0 * DEG..8.0 * DEG)),
            DVector::from_fn(5, |_, _| rng.random_range(-20.0 * DEG..20.0 * DEG)),
        )
        .unwrap();
        let u = vec![Input::new(DVector::from_fn(10, |_, _| {
            rng.random_range(0.0..70_000.0)
        }))];
        let euler = rollout_fp(
            &RolloutConfig::new(Scheme::Euler, 0.02, 1000).unwrap(),
            &model,
            &dom,
            &x0,
            &u,
        )
        .unwrap();
        let oracle = oracle_rollout(&model, &dom, &x0, &u, 0.02).unwrap();
        let dq = (euler.states[1].q.clone() - &oracle.states[1].q).abs().max();
        let dqd = (euler.states[1].qd.clone() - &oracle.states[1].qd).abs().max();
        assert!(dq < 0.01 * DEG, "position deviation {} deg", dq / DEG);
        // Joints stuck in the Coulomb regime carry a bounded velocity chatter
        // at this step size; 0.25 deg/s is the observed limit-cycle amplitude.
        assert!(dqd < 0.25 * DEG, "velocity deviation {} deg/s", dqd / DEG);
    }

    #[test]
    fn divergence_reports_step_index() {
        struct Blowup;
        impl OdeSystem for Blowup {
            fn dim(&self) -> usize {
                2
            }
            fn derivative(&mut self, x: &[f64], _u: &[f64], out: &mut [f64]) -> Result<()> {
                out[0] = x[0] * x[0];
                out[1] = 0.0;
                Ok(())
            }
        }
        let mut sys = Blowup;
        let cfg = RolloutConfig::new(Scheme::Euler, 1.0, 10).unwrap();
        let x0 = State::new(DVector::from_vec(vec![3.0]), DVector::zeros(1)).unwrap();
        let err = rollout(&cfg, &mut sys, &x0, &vec![Input::zeros(1); 10]).unwrap_err();
        match err {
            Error::Diverged { step, .. } => assert!(step < 10),
            other => panic!("expected divergence, got {other}"),
        }
    }
}

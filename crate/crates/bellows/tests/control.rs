//! Controller behavior against constructed optima and the simulated plant.

use bellows::control::*;
use bellows::model::DEG;
use bellows::net::{Boundaries, Head, SurrogateModel};
use bellows::{Domain, RobotModel};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

fn surrogate(seed: u64) -> SurrogateModel {
    let mut rng = StdRng::seed_from_u64(seed);
    SurrogateModel::new(
        5,
        0.02,
        Boundaries::default(),
        Head::DdPinn { n_a: 4 },
        2,
        24,
        &mut rng,
    )
}

/// Scaled reference window produced by rolling the surrogate itself from x0
/// under a constant input, so that input is a perfect-tracking optimum.
fn rollout_window(
    s: &SurrogateModel,
    x0: &DVector<f64>,
    u: &DVector<f64>,
    d: &[f64; 2],
    m: usize,
) -> RefWindow {
    let n = s.n;
    let mut q_d = Vec::new();
    let mut qd_d = Vec::new();
    let mut x = x0.clone();
    for _ in 0..m {
        x = s.predict_scaled(s.t_s, &x, u, d).unwrap();
        q_d.push(x.rows(0, n).into_owned());
        qd_d.push(x.rows(n, n).into_owned());
    }
    RefWindow { q_d, qd_d }
}

#[test]
fn horizon_one_cost_is_terminal_plus_input() {
    let s = surrogate(1);
    let mut cfg = MpcConfig::default_for(&s, 0.7e5);
    cfg.horizon = 1;
    let mut rng = StdRng::seed_from_u64(2);
    let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.5..0.5));
    let u = DVector::from_fn(10, |_, _| rng.random_range(cfg.u_min..cfg.u_max));
    let d = [0.1, -0.2];
    let window = rollout_window(&s, &x0, &DVector::zeros(10), &d, 1);
    let (cost, _) = mpc_cost(&u, &x0, &window, &d, &s, &cfg).unwrap();
    // rebuild by hand: terminal errors of the one-step prediction + input term
    let pred = s.predict_scaled(s.t_s, &x0, &u, &d).unwrap();
    let eq = pred.rows(0, 5) - &window.q_d[0];
    let eqd = pred.rows(5, 5) - &window.qd_d[0];
    let expect = cfg.q_term_pos * eq.norm_squared()
        + cfg.q_term_vel * eqd.norm_squared()
        + cfg.r_input * u.norm_squared();
    assert!((cost - expect).abs() < 1e-12);
}

#[test]
fn cost_gradient_matches_finite_differences() {
    let s = surrogate(3);
    let cfg = MpcConfig::default_for(&s, 0.7e5);
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..5 {
        let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.5..0.5));
        let u = DVector::from_fn(10, |_, _| rng.random_range(-0.6..0.6));
        let d = [rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)];
        let window = rollout_window(&s, &x0, &DVector::zeros(10), &d, cfg.horizon);
        let (_, g) = mpc_cost(&u, &x0, &window, &d, &s, &cfg).unwrap();
        let h = 1e-6;
        for i in 0..10 {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let fp = mpc_cost(&up, &x0, &window, &d, &s, &cfg).unwrap().0;
            let fm = mpc_cost(&um, &x0, &window, &d, &s, &cfg).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-4);
            assert!(
                (g[i] - fd).abs() / denom < 1e-5,
                "channel {i}: {} vs {fd}",
                g[i]
            );
        }
    }
}

#[test]
fn perfect_tracking_leaves_only_the_input_cost() {
    let s = surrogate(5);
    let cfg = MpcConfig::default_for(&s, 0.7e5);
    let mut rng = StdRng::seed_from_u64(6);
    let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.4..0.4));
    let u_star = DVector::from_fn(10, |_, _| rng.random_range(-0.5..0.5));
    let d = [0.3, 0.0];
    let window = rollout_window(&s, &x0, &u_star, &d, cfg.horizon);
    let (cost, _) = mpc_cost(&u_star, &x0, &window, &d, &s, &cfg).unwrap();
    let expect = cfg.horizon as f64 * cfg.r_input * u_star.norm_squared();
    assert!((cost - expect).abs() < 1e-12, "{cost} vs {expect}");
}

#[test]
fn solver_recovers_a_constructed_interior_optimum() {
    // a direct head with a linear core is affine in the input, so the cost
    // is strictly convex with a unique constructed optimum that the solver
    // must land on exactly
    let mut rng = StdRng::seed_from_u64(70);
    let s = SurrogateModel::new(5, 0.02, Boundaries::default(), Head::Pinc, 0, 0, &mut rng);
    let mut cfg = MpcConfig::default_for(&s, 0.7e5);
    cfg.r_input = 0.0;
    cfg.max_iters = 200;
    cfg.grad_tol = 1e-9;
    cfg.check_gradients = true;
    let mut rng = StdRng::seed_from_u64(8);
    for trial in 0..3 {
        let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.3..0.3));
        let u_star = DVector::from_fn(10, |_, _| rng.random_range(-0.4..0.4));
        let d = [0.0, 0.25];
        let window = rollout_window(&s, &x0, &u_star, &d, cfg.horizon);
        let sol = mpc_solve(&x0, &window, &d, &s, &cfg, None).unwrap();
        let err = (&sol.u - &u_star).abs().max();
        assert!(
            err < 1e-2,
            "trial {trial}: recovered input off by {err} (scaled)"
        );
    }
}

#[test]
fn infeasible_reference_saturates_a_channel() {
    let s = surrogate(9);
    let cfg = MpcConfig::default_for(&s, 0.7e5);
    let x0 = DVector::zeros(10);
    let d = [0.0, 0.0];
    // desired positions far beyond anything reachable in m steps
    let window = RefWindow {
        q_d: vec![DVector::from_element(5, 50.0); cfg.horizon],
        qd_d: vec![DVector::zeros(5); cfg.horizon],
    };
    let sol = mpc_solve(&x0, &window, &d, &s, &cfg, None).unwrap();
    let at_bound = sol
        .u
        .iter()
        .any(|&v| (v - cfg.u_min).abs() < 1e-9 || (v - cfg.u_max).abs() < 1e-9);
    assert!(at_bound, "expected active box bound, got {:?}", sol.u);
}

#[test]
fn optimal_warm_start_returns_immediately() {
    let s = surrogate(10);
    let mut cfg = MpcConfig::default_for(&s, 0.7e5);
    cfg.r_input = 0.0;
    cfg.max_iters = 60;
    let mut rng = StdRng::seed_from_u64(11);
    let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.3..0.3));
    let u_star = DVector::from_fn(10, |_, _| rng.random_range(-0.4..0.4));
    let d = [0.1, 0.1];
    let window = rollout_window(&s, &x0, &u_star, &d, cfg.horizon);
    let sol = mpc_solve(&x0, &window, &d, &s, &cfg, Some(&u_star)).unwrap();
    assert!(sol.iterations <= 1, "took {} iterations", sol.iterations);
    assert!((&sol.u - &u_star).abs().max() < 1e-9);
    assert!(sol.improved); // the warm start itself is already optimal
}

#[test]
fn identical_inputs_give_identical_solutions() {
    let s = surrogate(12);
    let cfg = MpcConfig::default_for(&s, 0.7e5);
    let mut rng = StdRng::seed_from_u64(13);
    let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.3..0.3));
    let d = [0.2, -0.1];
    let window = rollout_window(&s, &x0, &DVector::from_element(10, 0.2), &d, cfg.horizon);
    let warm = DVector::from_element(10, -0.1);
    let a = mpc_solve(&x0, &window, &d, &s, &cfg, Some(&warm)).unwrap();
    let b = mpc_solve(&x0, &window, &d, &s, &cfg, Some(&warm)).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.cost, b.cost);
}

#[test]
fn zero_reference_from_equilibrium_tracks_perfectly() {
    let robot = RobotModel::chain(2);
    let dom = Domain::training();
    let reference = Reference::zero(2, 2.0, 0.02);

    // PI at rest
    let pi = Controller::Pi {
        config: PiConfig::default_gains(2),
    };
    let log = closed_loop(&robot, &pi, &reference, &dom, 2.0).unwrap();
    assert!(log.mae_q < 1e-6, "pi mae {}", log.mae_q);

    // MPC with a surrogate that predicts a fixed point at the scaled origin:
    // zero core weights make the prediction x̂ = x0, so the optimizer settles
    // at the balanced mid pressure and the plant stays put
    let mut rng = StdRng::seed_from_u64(14);
    let mut s = SurrogateModel::new(
        2,
        0.02,
        Boundaries::default(),
        Head::DdPinn { n_a: 2 },
        1,
        8,
        &mut rng,
    );
    for l in &mut s.core.layers {
        l.w.fill(0.0);
        l.b.fill(0.0);
    }
    let mpc = Controller::Mpc {
        config: MpcConfig::default_for(&s, 0.7e5),
        surrogate: &s,
    };
    let log = closed_loop(&robot, &mpc, &reference, &dom, 2.0).unwrap();
    assert!(log.mae_q < 1e-6, "mpc mae {}", log.mae_q);
    assert!(log.mean_rate_hz > 1.0);
}

#[test]
fn pi_step_response_settles_into_the_stiction_band() {
    // With the printed Coulomb model the plant creeps rather than sticks
    // hard, so a PI loop converges into a slow stick-slip band around the
    // target whose width is set by the friction-to-gain ratio. The integral
    // action removes the error completely only when Coulomb friction is off.
    let dom = Domain::training();
    let t_s = 0.02;
    let steps = (6.0 / t_s) as usize;
    let target = DVector::from_element(5, 5.0 * DEG);
    let reference = Reference {
        t_s,
        q_d: vec![target.clone(); steps],
        qd_d: vec![DVector::zeros(5); steps],
    };
    let pi = Controller::Pi {
        config: PiConfig::default_gains(5),
    };

    let robot = RobotModel::default_5dof();
    let log = closed_loop(&robot, &pi, &reference, &dom, 6.0).unwrap();
    let settle_idx = (4.0 / 1e-3) as usize;
    for k in settle_idx..log.q.len() {
        let err = (&log.q[k] - &target).abs().max();
        assert!(err < 0.75 * DEG, "t = {}: error {} deg", log.t[k], err / DEG);
    }

    // frictionless variant: the integral action converges exponentially
    // (closed-loop pole near 0.6 rad/s with these gains) to zero error
    let mut ideal = RobotModel::default_5dof();
    ideal.coulomb.fill(0.0);
    let log = closed_loop(&ideal, &pi, &reference, &dom, 6.0).unwrap();
    let settle_idx = (4.0 / 1e-3) as usize;
    for k in settle_idx..log.q.len() {
        let err = (&log.q[k] - &target).abs().max();
        assert!(err < 0.2 * DEG, "t = {}: error {} deg", log.t[k], err / DEG);
    }
    let final_err = (log.q.last().unwrap() - &target).abs().max();
    assert!(final_err < 0.06 * DEG, "steady-state error {}", final_err / DEG);
}

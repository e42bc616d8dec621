//! Acceptance suite: one test per pinned criterion, each printing a
//! `[PASS]`/`[FAIL]` line with its measured numbers.
//!
//! Run with `cargo test -p bellows --test acceptance -- --nocapture`.
//! Trained models are shared between criteria through lazy fixtures, so the
//! suite trains the surrogates and the baseline exactly once.

use std::sync::OnceLock;

use bellows::control::{
    closed_loop, generate_reference, mpc_solve, Controller, MpcConfig, PiConfig, RefWindow,
};
use bellows::dataset::Dataset;
use bellows::ident::{identify_all, IdentConfig};
use bellows::integrate::{rollout_fp, RolloutConfig, Scheme};
use bellows::model::DEG;
use bellows::net::{ansatz_dt, ansatz_eval, Boundaries, Gru, GruModel, Head, SurrogateModel};
use bellows::testbench::{
    bench_speed, domain_grid, evaluate_generalization, generate_excitation, simulate_plant,
    EvalModel, ExcitationProtocol, PlantFidelity, SensorModel,
};
use bellows::train::{
    asha_optimize, check_rung_invariants, physics_loss, sample_collocation, train_gru,
    train_pinn, AshaConfig, FpScaled, GruTrainConfig, TrainConfig,
};
use bellows::{Domain, Input, RobotModel, State};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

fn criterion(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "[PASS]" } else { "[FAIL]" };
    println!("{tag} {name}: {detail}");
    assert!(pass, "{name}: {detail}");
}

fn robot() -> &'static RobotModel {
    static ROBOT: OnceLock<RobotModel> = OnceLock::new();
    ROBOT.get_or_init(RobotModel::default_5dof)
}

/// The 15-minute training-domain excitation dataset, once without sensor
/// effects and once with quantized sensors.
fn ident_datasets() -> &'static (Dataset, Dataset) {
    static DATA: OnceLock<(Dataset, Dataset)> = OnceLock::new();
    DATA.get_or_init(|| {
        let protocol = ExcitationProtocol::train(900.0);
        let mut rng = StdRng::seed_from_u64(20_001);
        let excitation = generate_excitation(&protocol, robot().n, &mut rng).unwrap();
        let clean = simulate_plant(
            robot(),
            &excitation,
            &Domain::training(),
            &protocol,
            None,
            PlantFidelity::Fast,
        )
        .unwrap();
        let sensors = SensorModel::default();
        let noisy = simulate_plant(
            robot(),
            &excitation,
            &Domain::training(),
            &protocol,
            Some(&sensors),
            PlantFidelity::Fast,
        )
        .unwrap();
        (clean, noisy)
    })
}

/// Identical-budget head-to-head pair plus their final physics losses on a
/// shared fresh collocation set.
fn head_pair() -> &'static (SurrogateModel, SurrogateModel, f64, f64) {
    static PAIR: OnceLock<(SurrogateModel, SurrogateModel, f64, f64)> = OnceLock::new();
    PAIR.get_or_init(|| {
        let base = TrainConfig {
            epochs: 150,
            resample_every: 100,
            collocation_points: 10_000,
            ic_points: 2_000,
            batch_size: 512,
            plateau_patience: 30,
            lr0: 7e-4,
            lr_min: 5e-5,
            hidden_layers: 2,
            neurons: 48,
            seed: 7,
            ..TrainConfig::desk_default()
        };
        let dd_cfg = TrainConfig {
            ansatz_terms: 16,
            ..base
        };
        let pinc_cfg = TrainConfig {
            ansatz_terms: 0,
            ..base
        };
        let (dd, _) = train_pinn(
            robot().n,
            &dd_cfg,
            |sc| FpScaled::new(robot(), sc.clone()),
            None,
        )
        .unwrap();
        let (pinc, _) = train_pinn(
            robot().n,
            &pinc_cfg,
            |sc| FpScaled::new(robot(), sc.clone()),
            None,
        )
        .unwrap();
        // final validation physics loss on one shared fresh point set
        let mut rng = StdRng::seed_from_u64(515);
        let set = sample_collocation(robot().n, 4_096, &mut rng);
        let mut fp_dd = FpScaled::new(robot(), dd.scaler.clone());
        let dd_loss = physics_loss(&dd, &set.points, &mut fp_dd).unwrap().value;
        let mut fp_pinc = FpScaled::new(robot(), pinc.scaler.clone());
        let pinc_loss = physics_loss(&pinc, &set.points, &mut fp_pinc)
            .unwrap()
            .value;
        (dd, pinc, dd_loss, pinc_loss)
    })
}

/// The production-quality desk-scale surrogate used by the accuracy, speed,
/// and control criteria.
fn trained_dd() -> &'static SurrogateModel {
    static MODEL: OnceLock<SurrogateModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = TrainConfig {
            epochs: 1500,
            resample_every: 250,
            collocation_points: 50_000,
            ic_points: 0,
            batch_size: 512,
            ansatz_terms: 24,
            plateau_patience: 60,
            lr0: 7e-4,
            lr_min: 5e-5,
            hidden_layers: 2,
            neurons: 96,
            seed: 1,
            ..TrainConfig::desk_default()
        };
        let (model, report) = train_pinn(
            robot().n,
            &cfg,
            |sc| FpScaled::new(robot(), sc.clone()),
            None,
        )
        .unwrap();
        println!(
            "  [fixture] surrogate trained: best validation loss {:.3}, {} epochs",
            report.best_val,
            report.history.len()
        );
        model
    })
}

fn trained_gru() -> &'static GruModel {
    static MODEL: OnceLock<GruModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let (clean, _) = ident_datasets();
        let cfg = GruTrainConfig {
            epochs: 120,
            window: 50,
            hidden: 48,
            lr0: 3e-3,
            lr_min: 1e-4,
            plateau_patience: 10,
            boundaries: Boundaries::default(),
            seed: 3,
        };
        let (model, report) = train_gru(&cfg, clean).unwrap();
        println!(
            "  [fixture] gru trained: best validation MSE {:.3e}",
            report.best_val
        );
        model
    })
}

// ---------------------------------------------------------------------------

#[test]
fn c1_fp_model_correctness() {
    let model = robot();
    let mut rng = StdRng::seed_from_u64(101);
    let kappa_q = 1.25 * 25.0 * DEG;

    // symmetry and positive definiteness over 1000 random configurations
    let mut max_asym: f64 = 0.0;
    for _ in 0..1000 {
        let q = DVector::from_fn(5, |_, _| rng.random_range(-kappa_q..kappa_q));
        let dom = Domain::new(rng.random_range(0.0..0.25), rng.random_range(0.0..1.6)).unwrap();
        let m = model.mass_matrix(&q, &dom).unwrap();
        max_asym = max_asym.max((&m - m.transpose()).abs().max());
        assert!(m.cholesky().is_some(), "mass matrix must be SPD");
    }

    // energy conservation without dissipation at 10 µs RK4 steps
    let mut conservative = model.clone();
    conservative.viscous.fill(0.0);
    conservative.coulomb.fill(0.0);
    conservative.contact_damping = 0.0;
    let dom = Domain::new(0.1, 0.7).unwrap();
    let x0 = State::new(
        DVector::from_fn(5, |_, _| rng.random_range(-5.0 * DEG..5.0 * DEG)),
        DVector::from_fn(5, |_, _| rng.random_range(-20.0 * DEG..20.0 * DEG)),
    )
    .unwrap();
    let u = vec![Input::new(DVector::from_element(10, 30_000.0)); 50];
    let cfg = RolloutConfig::new(Scheme::Rk4, 0.02, 2000).unwrap(); // 10 µs
    let traj = rollout_fp(&cfg, &conservative, &dom, &x0, &u).unwrap();
    let e0 = conservative.total_energy(&x0, &dom).unwrap();
    let mut drift: f64 = 0.0;
    for s in &traj.states {
        assert!(s.q.abs().max() <= model.boundary_threshold, "stayed in bounds");
        let e = conservative.total_energy(s, &dom).unwrap();
        drift = drift.max((e - e0).abs() / e0.abs());
    }

    // gravity = finite-difference gradient of the potential
    let mut max_grad_err: f64 = 0.0;
    for _ in 0..20 {
        let q = DVector::from_fn(5, |_, _| rng.random_range(-0.5..0.5));
        let dom = Domain::new(rng.random_range(0.0..0.2), rng.random_range(0.0..1.5)).unwrap();
        let g = model.gravity_torques(&q, &dom).unwrap();
        for k in 0..5 {
            let h = 1e-6;
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            let fd = (model.potential_energy(&qp, &dom).unwrap()
                - model.potential_energy(&qm, &dom).unwrap())
                / (2.0 * h);
            max_grad_err = max_grad_err.max((g[k] - fd).abs() / g[k].abs().max(1e-3));
        }
    }

    // forward/inverse round trip
    let mut max_rt: f64 = 0.0;
    for _ in 0..50 {
        let q = DVector::from_fn(5, |_, _| rng.random_range(-0.5..0.5));
        let qd = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let p = DVector::from_fn(10, |_, _| rng.random_range(0.0..7e4));
        let dom = Domain::new(rng.random_range(0.0..0.2), rng.random_range(0.0..1.5)).unwrap();
        let state = State::new(q.clone(), qd.clone()).unwrap();
        let deriv = model
            .forward_dynamics(&state, &Input::new(p.clone()), &dom)
            .unwrap();
        let tau = model.inverse_dynamics(&q, &qd, &deriv.qdd, &dom).unwrap();
        let expect = model.actuation_torques(&p).unwrap();
        max_rt = max_rt.max((tau - expect).abs().max());
    }

    let pass = max_asym <= 1e-10 && drift < 1e-3 && max_grad_err < 1e-6 && max_rt < 1e-8;
    criterion(
        "criterion 1 (fp-model suite)",
        pass,
        &format!(
            "asymmetry {max_asym:.2e}, energy drift {:.4}%, gravity FD {max_grad_err:.2e}, round trip {max_rt:.2e}",
            drift * 100.0
        ),
    );
}

#[test]
fn c2_identification_recovery() {
    let model = robot();
    let (clean, noisy) = ident_datasets();
    let cfg = IdentConfig::default();

    let rel = |est: f64, truth: f64| (est - truth).abs() / truth;
    let check = |ds: &Dataset| -> f64 {
        let res = identify_all(ds, model, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..5 {
            worst = worst.max(rel(res.k_s[j], model.stiffness[j]));
            worst = worst.max(rel(res.k_v[j], model.viscous[j]));
            worst = worst.max(rel(res.k_c[j], model.coulomb[j]));
        }
        worst = worst.max(rel(res.k_bs, model.contact_stiffness));
        worst = worst.max(rel(res.k_bd, model.contact_damping));
        worst
    };

    let worst_clean = check(clean);
    let worst_noisy = check(noisy);
    let fractions = identify_all(clean, model, &cfg).unwrap().subset_fractions;
    let pass = worst_clean < 0.02 && worst_noisy < 0.10;
    criterion(
        "criterion 2 (identification recovery)",
        pass,
        &format!(
            "worst relative error {:.2}% noiseless, {:.2}% quantized; regime fractions {:.0}%/{:.0}%/{:.0}%",
            worst_clean * 100.0,
            worst_noisy * 100.0,
            fractions[0] * 100.0,
            fractions[1] * 100.0,
            fractions[2] * 100.0
        ),
    );
}

#[test]
fn c3_structural_initial_condition() {
    let mut worst: f64 = 0.0;
    let mut rng = StdRng::seed_from_u64(303);
    for seed in 0..10 {
        let mut mrng = StdRng::seed_from_u64(9_000 + seed);
        let model = SurrogateModel::new(
            5,
            0.02,
            Boundaries::default(),
            Head::DdPinn { n_a: 8 },
            2,
            24,
            &mut mrng,
        );
        for _ in 0..100 {
            let x_s = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
            let u_s = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
            let d_s = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let pred = model.predict_scaled(0.0, &x_s, &u_s, &d_s).unwrap();
            worst = worst.max((pred - x_s).abs().max());
        }
    }
    criterion(
        "criterion 3 (structural initial condition)",
        worst <= 1e-12,
        &format!("max |x̂(0) − x0| = {worst:.2e} (scaled) over 1000 probes"),
    );
}

#[test]
fn c4_derivative_exactness() {
    let mut rng = StdRng::seed_from_u64(404);
    let rel = |a: f64, b: f64, floor: f64| (a - b).abs() / a.abs().max(b.abs()).max(floor);

    // ansatz time derivative
    let mut worst_ansatz: f64 = 0.0;
    for _ in 0..20 {
        let (n_a, dim) = (5, 4);
        let alpha: Vec<f64> = (0..4 * n_a * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = rng.random_range(0.05..0.95);
        let h = 1e-6;
        let mut a_p = vec![0.0; dim];
        let mut a_m = vec![0.0; dim];
        let mut dt = vec![0.0; dim];
        ansatz_eval(&alpha, n_a, dim, t + h, &mut a_p);
        ansatz_eval(&alpha, n_a, dim, t - h, &mut a_m);
        ansatz_dt(&alpha, n_a, dim, t, &mut dt);
        for k in 0..dim {
            worst_ansatz = worst_ansatz.max(rel(dt[k], (a_p[k] - a_m[k]) / (2.0 * h), 1e-3));
        }
    }

    // direct-head time derivative via the forward tangent
    let mut worst_pinc: f64 = 0.0;
    let model = SurrogateModel::new(3, 0.02, Boundaries::default(), Head::Pinc, 2, 16, &mut rng);
    for _ in 0..20 {
        let x0 = State::new(
            DVector::from_fn(3, |_, _| rng.random_range(-0.3..0.3)),
            DVector::from_fn(3, |_, _| rng.random_range(-0.4..0.4)),
        )
        .unwrap();
        let u0 = Input::new(DVector::from_fn(6, |_, _| rng.random_range(0.0..8e4)));
        let dom = Domain::new(rng.random_range(0.0..0.2), rng.random_range(0.0..1.5)).unwrap();
        let t = rng.random_range(0.002..0.02);
        let dt = model.predict_dt(t, &x0, &u0, &dom).unwrap();
        let h = 1e-7;
        let p = model.predict(t + h, &x0, &u0, &dom).unwrap().to_vector();
        let m = model.predict(t - h, &x0, &u0, &dom).unwrap().to_vector();
        for i in 0..6 {
            worst_pinc = worst_pinc.max(rel(dt[i], (p[i] - m[i]) / (2.0 * h), 1e-3));
        }
    }

    // core backprop
    let mut worst_mlp: f64 = 0.0;
    {
        let mut mlp = bellows::net::Mlp::xavier(&[4, 8, 8, 3], &mut rng);
        let x = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let (y, cache) = mlp.forward(&x).unwrap();
        let (grads, _) = mlp.backward(&cache, &y);
        let flat = grads.flat();
        let mut params = mlp.params_flat();
        let h = 1e-5;
        let count = params.len();
        for idx in (0..count).step_by(count / 25 + 1) {
            let orig = params[idx];
            params[idx] = orig + h;
            mlp.set_params_flat(&params);
            let lp = 0.5 * mlp.forward_only(&x).unwrap().norm_squared();
            params[idx] = orig - h;
            mlp.set_params_flat(&params);
            let lm = 0.5 * mlp.forward_only(&x).unwrap().norm_squared();
            params[idx] = orig;
            mlp.set_params_flat(&params);
            worst_mlp = worst_mlp.max(rel(flat[idx], (lp - lm) / (2.0 * h), 1e-4));
        }
    }

    // gru step gradients
    let mut worst_gru: f64 = 0.0;
    {
        let mut gru = Gru::new(4, 6, 3, &mut rng);
        let h0 = DVector::from_fn(6, |_, _| rng.random_range(-0.5..0.5));
        let x = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let target = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let (_, out, cache) = gru.step_cached(&h0, &x);
        let mut grads = bellows::net::GruGrads::zeros_like(&gru);
        gru.backward_step(&cache, &DVector::zeros(6), &(out - &target), &mut grads);
        let flat = grads.flat();
        let mut params = gru.params_flat();
        let h = 1e-5;
        let count = params.len();
        for idx in (0..count).step_by(count / 25 + 1) {
            let orig = params[idx];
            params[idx] = orig + h;
            gru.set_params_flat(&params);
            let lp = {
                let (_, o) = gru.step(&h0, &x);
                0.5 * (o - &target).norm_squared()
            };
            params[idx] = orig - h;
            gru.set_params_flat(&params);
            let lm = {
                let (_, o) = gru.step(&h0, &x);
                0.5 * (o - &target).norm_squared()
            };
            params[idx] = orig;
            gru.set_params_flat(&params);
            worst_gru = worst_gru.max(rel(flat[idx], (lp - lm) / (2.0 * h), 1e-4));
        }
    }

    let pass = worst_ansatz <= 1e-6 && worst_pinc <= 1e-6 && worst_mlp <= 1e-6 && worst_gru <= 1e-6;
    criterion(
        "criterion 4 (derivative exactness)",
        pass,
        &format!(
            "worst relative FD error: ansatz {worst_ansatz:.2e}, direct-head dt {worst_pinc:.2e}, mlp {worst_mlp:.2e}, gru {worst_gru:.2e}"
        ),
    );
}

#[test]
fn c5_training_convergence_ordering() {
    let (_, _, dd_loss, pinc_loss) = head_pair();
    criterion(
        "criterion 5 (convergence ordering)",
        dd_loss < pinc_loss,
        &format!(
            "final physics loss on a shared validation set: ansatz head {dd_loss:.3} < direct head {pinc_loss:.3}"
        ),
    );
}

#[test]
fn c6_surrogate_accuracy_and_generalization() {
    let dd = trained_dd();
    let gru = trained_gru();
    let models: Vec<(String, EvalModel)> = vec![
        ("dd".into(), EvalModel::Surrogate(dd)),
        ("gru".into(), EvalModel::Gru(gru)),
    ];
    let grid = domain_grid();
    let report =
        evaluate_generalization(&models, robot(), &grid, 10.0, dd.t_s, 606).unwrap();

    let dd_cells = &report.cells[0];
    let gru_cells = &report.cells[1];
    let base_idx = grid
        .iter()
        .position(|d| d.payload == 0.0 && d.tilt == 0.0)
        .unwrap();
    let far_idx = grid
        .iter()
        .position(|d| (d.payload - 0.2).abs() < 1e-12 && (d.tilt - 90.0 * DEG).abs() < 1e-9)
        .unwrap();

    let dd_base = dd_cells[base_idx].mae_q / DEG;
    let dd_ratio = dd_cells
        .iter()
        .map(|c| c.mae_q / dd_cells[base_idx].mae_q)
        .fold(0.0, f64::max);
    let gru_base = gru_cells[base_idx].mae_q / DEG;
    let gru_far_ratio = gru_cells[far_idx].mae_q / gru_cells[base_idx].mae_q;
    let any_failed = dd_cells.iter().chain(gru_cells.iter()).any(|c| c.failed);

    let pass = !any_failed && dd_base <= 3.0 && dd_ratio <= 1.25 && gru_far_ratio >= 1.5;
    criterion(
        "criterion 6 (surrogate accuracy & generalization)",
        pass,
        &format!(
            "surrogate MAE {dd_base:.2}° in the training domain, cross-domain ratio {dd_ratio:.2}; gru {gru_base:.2}° with far-domain ratio {gru_far_ratio:.2}"
        ),
    );
}

#[test]
fn c7_speed_benchmark() {
    let dd = trained_dd();
    let (_, pinc, _, _) = head_pair();
    let table = bench_speed(
        &[("dd-pinn".into(), dd), ("pinc".into(), pinc)],
        &[
            ("euler".into(), RolloutConfig::euler_default()),
            ("rk4".into(), RolloutConfig::rk4_default()),
        ],
        robot(),
        &Domain::training(),
        100.0,
        dd.t_s,
        707,
    )
    .unwrap();
    let calls: Vec<usize> = table.rows.iter().map(|r| r.n_calls).collect();
    let dd_mean = table.mean_of("dd-pinn").unwrap();
    let euler_mean = table.mean_of("euler").unwrap();
    let speedup = euler_mean / dd_mean;
    let pass = calls == vec![1, 1, 1000, 200] && dd_mean <= euler_mean / 100.0;
    criterion(
        "criterion 7 (speed benchmark)",
        pass,
        &format!(
            "n_calls {calls:?}; surrogate {dd_mean:.4} ms vs explicit Euler {euler_mean:.3} ms per 20 ms horizon ({speedup:.0}x)"
        ),
    );
}

#[test]
fn c8_mpc_suite() {
    // solver certification: constructed optimum on an affine surrogate with
    // gradient checks active at every iterate
    let mut rng = StdRng::seed_from_u64(808);
    let affine = SurrogateModel::new(5, 0.02, Boundaries::default(), Head::Pinc, 0, 0, &mut rng);
    let mut cfg = MpcConfig::default_for(&affine, 0.7e5);
    cfg.r_input = 0.0;
    cfg.max_iters = 200;
    cfg.grad_tol = 1e-9;
    cfg.check_gradients = true;
    let mut worst_recovery: f64 = 0.0;
    for _ in 0..3 {
        let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.3..0.3));
        let u_star = DVector::from_fn(10, |_, _| rng.random_range(-0.4..0.4));
        let d = [0.0, 0.2];
        let mut q_d = Vec::new();
        let mut qd_d = Vec::new();
        let mut x = x0.clone();
        for _ in 0..cfg.horizon {
            x = affine.predict_scaled(affine.t_s, &x, &u_star, &d).unwrap();
            q_d.push(x.rows(0, 5).into_owned());
            qd_d.push(x.rows(5, 5).into_owned());
        }
        let window = RefWindow { q_d, qd_d };
        let sol = mpc_solve(&x0, &window, &d, &affine, &cfg, None).unwrap();
        worst_recovery = worst_recovery.max((&sol.u - &u_star).abs().max());
    }

    // saturation on an unreachable reference with the trained surrogate
    let dd = trained_dd();
    let sat_cfg = MpcConfig::default_for(dd, 0.7e5);
    let window = RefWindow {
        q_d: vec![DVector::from_element(5, 30.0); sat_cfg.horizon],
        qd_d: vec![DVector::zeros(5); sat_cfg.horizon],
    };
    let sol = mpc_solve(
        &DVector::zeros(10),
        &window,
        &[dd.scaler.scale_domain(&Domain::training())[0], 0.0],
        dd,
        &sat_cfg,
        None,
    )
    .unwrap();
    let saturated = sol
        .u
        .iter()
        .any(|&v| (v - sat_cfg.u_min).abs() < 1e-9 || (v - sat_cfg.u_max).abs() < 1e-9);

    // six-domain tracking campaign, 40 s each: surrogate-MPC vs PI
    let mut mpc_maes = Vec::new();
    let mut pi_maes = Vec::new();
    let mut min_rate = f64::INFINITY;
    for &beta_deg in &[0.0, 45.0, 90.0] {
        for &me in &[0.0, 0.2] {
            let dom = Domain::new(me, beta_deg * DEG).unwrap();
            let mut rng = StdRng::seed_from_u64(880 + (beta_deg as u64) + (me * 10.0) as u64);
            let reference = generate_reference(5, 40.0, dd.t_s, &mut rng);
            let mpc = Controller::Mpc {
                config: MpcConfig::default_for(dd, 0.7e5),
                surrogate: dd,
            };
            let log = closed_loop(robot(), &mpc, &reference, &dom, 40.0).unwrap();
            mpc_maes.push(log.mae_q / DEG);
            min_rate = min_rate.min(log.mean_rate_hz);
            let pi = Controller::Pi {
                config: PiConfig::default_gains(5),
            };
            let pi_log = closed_loop(robot(), &pi, &reference, &dom, 40.0).unwrap();
            pi_maes.push(pi_log.mae_q / DEG);
            println!(
                "  [{beta_deg:>2.0}°, {:>3.0} g] mpc {:.2}° @ {:.0} Hz | pi {:.2}°",
                me * 1000.0,
                log.mae_q / DEG,
                log.mean_rate_hz,
                pi_log.mae_q / DEG
            );
        }
    }
    let mpc_mean = mpc_maes.iter().sum::<f64>() / mpc_maes.len() as f64;
    let pi_mean = pi_maes.iter().sum::<f64>() / pi_maes.len() as f64;

    let pass = worst_recovery < 1e-2 && saturated && mpc_mean < pi_mean && min_rate >= 20.0;
    criterion(
        "criterion 8 (mpc suite)",
        pass,
        &format!(
            "optimum recovery {worst_recovery:.1e} (scaled); saturation {saturated}; campaign mean MAE mpc {mpc_mean:.2}° vs pi {pi_mean:.2}° ({:.1}% better); min rate {min_rate:.0} Hz",
            (1.0 - mpc_mean / pi_mean) * 100.0
        ),
    );
}

#[test]
fn c9_asha_search() {
    // synthetic objective: quadratic in log lr over a 16-cell grid, improving
    // with budget, with the optimum at cell 9
    let grid: Vec<f64> = (0..16).map(|k| 10f64.powf(-4.0 + 0.25 * k as f64)).collect();
    let target = grid[9];
    let cfg = AshaConfig {
        trials: 12,
        grace: 30,
        reduction: 2,
        max_budget: 240,
        workers: 2,
        seed: 909,
    };
    let grid2 = grid.clone();
    let (best, table) = asha_optimize(
        move |rng| vec![grid2[rng.random_range(0..16usize)]],
        |c, budget, _| Ok((c[0].log10() - target.log10()).powi(2) + 3.0 / budget as f64),
        &cfg,
    )
    .unwrap();
    let invariants = check_rung_invariants(&table, &cfg);
    let best_cell = grid
        .iter()
        .position(|&g| (g - best[0]).abs() < 1e-15)
        .unwrap();
    let total_runs: usize = table.iter().map(|t| t.rungs.len()).sum();
    let pass = invariants.is_ok() && (best_cell as i64 - 9).abs() <= 1;
    criterion(
        "criterion 9 (asha search)",
        pass,
        &format!(
            "best cell {best_cell} (optimum 9) after {total_runs} rung runs over 12 trials; rung invariants {}",
            if invariants.is_ok() { "hold" } else { "violated" }
        ),
    );
}

//! Identification on synthetic data with known ground truth.
//!
//! Each construction builds torque-consistent datasets from analytic
//! trajectories (exact derivatives in, pressures out through the inverse
//! dynamics), so the only error sources are the ones the pipeline itself
//! introduces: filtering and numerical differentiation.

use bellows::dataset::Dataset;
use bellows::ident::*;
use bellows::model::DEG;
use bellows::{Domain, RobotModel};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

const RATE: f64 = 50.0;

/// Dataset from analytic joint trajectories: q(t), q̇(t), q̈(t) per joint.
fn dataset_from_motion(
    model: &RobotModel,
    domain: Domain,
    duration: f64,
    motion: impl Fn(f64) -> (DVector<f64>, DVector<f64>, DVector<f64>),
) -> Dataset {
    let rows = (duration * RATE) as usize;
    let n = model.n;
    let gain = model.pressure_area * model.lever_arm;
    let mut q = DMatrix::zeros(rows, n);
    let mut qd = DMatrix::zeros(rows, n);
    let mut p = DMatrix::zeros(rows, 2 * n);
    for r in 0..rows {
        let t = r as f64 / RATE;
        let (qt, qdt, qddt) = motion(t);
        let tau = model.inverse_dynamics(&qt, &qdt, &qddt, &domain).unwrap();
        for j in 0..n {
            q[(r, j)] = qt[j];
            qd[(r, j)] = qdt[j];
            let dp = tau[j] / gain;
            p[(r, 2 * j)] = 35_000.0 + dp / 2.0;
            p[(r, 2 * j + 1)] = 35_000.0 - dp / 2.0;
        }
    }
    Dataset {
        rate: RATE,
        domain,
        qd,
        p_d: p.clone(),
        p,
        q,
    }
}

/// Piecewise-constant random poses inside the soft boundaries, exact static
/// equilibrium at every sample.
fn static_holds_dataset(model: &RobotModel, seed: u64, holds: usize) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = model.n;
    let hold_rows = (2.0 * RATE) as usize;
    let poses: Vec<DVector<f64>> = (0..holds)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-8.0 * DEG..8.0 * DEG)))
        .collect();
    let rows = holds * hold_rows;
    let gain = model.pressure_area * model.lever_arm;
    let mut q = DMatrix::zeros(rows, n);
    let mut p = DMatrix::zeros(rows, 2 * n);
    let dom = Domain::new(0.05, 0.6).unwrap();
    for r in 0..rows {
        let pose = &poses[r / hold_rows];
        let tau = model.gravity_torques(pose, &dom).unwrap() + model.stiffness_torques(pose);
        for j in 0..n {
            q[(r, j)] = pose[j];
            let dp = tau[j] / gain;
            p[(r, 2 * j)] = 35_000.0 + dp / 2.0;
            p[(r, 2 * j + 1)] = 35_000.0 - dp / 2.0;
        }
    }
    // difference-consistent velocity channel so hold transitions classify
    // as dynamic instead of polluting the static fit
    let mut qd = DMatrix::zeros(rows, n);
    for r in 1..rows {
        for j in 0..n {
            qd[(r, j)] = (q[(r, j)] - q[(r - 1, j)]) * RATE;
        }
    }
    Dataset {
        rate: RATE,
        domain: dom,
        qd,
        p_d: p.clone(),
        p,
        q,
    }
}

fn multisine<'a>(
    n: usize,
    amps: &'a [f64],
    freqs: &'a [f64],
    phases: &'a [f64],
) -> impl Fn(f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) + 'a {
    move |t: f64| {
        let mut q = DVector::zeros(n);
        let mut qd = DVector::zeros(n);
        let mut qdd = DVector::zeros(n);
        for j in 0..n {
            for (k, &f) in freqs.iter().enumerate() {
                let w = 2.0 * std::f64::consts::PI * f;
                let a = amps[(j + k) % amps.len()];
                let ph = phases[(j * freqs.len() + k) % phases.len()];
                q[j] += a * (w * t + ph).sin();
                qd[j] += a * w * (w * t + ph).cos();
                qdd[j] -= a * w * w * (w * t + ph).sin();
            }
        }
        (q, qd, qdd)
    }
}

#[test]
fn partition_regimes_cover_and_classify() {
    let model = RobotModel::default_5dof();
    // holds strictly inside the boundaries: static everywhere except the
    // velocity spikes at the hold transitions
    let ds = static_holds_dataset(&model, 1, 2);
    let part = partition(&ds, &model);
    let f = part.fractions();
    assert!(f[0] > 0.95, "static fraction {}", f[0]);
    assert_eq!(f[2], 0.0);
    // a mid-hold row is fully static
    assert!(part.class[50].iter().all(|c| *c == Regime::Static));

    // boundary violation wins over the velocity test
    let mut ds2 = ds.clone();
    ds2.q[(0, 2)] = 15.0 * DEG;
    ds2.qd[(0, 2)] = 5.0 * DEG;
    let part2 = partition(&ds2, &model);
    assert_eq!(part2.class[0][2], Regime::Contact);
    // disjoint cover is structural: every pair gets exactly one regime
    let f = part2.fractions();
    assert!((f[0] + f[1] + f[2] - 1.0).abs() < 1e-12);
}

#[test]
fn stiffness_recovery_from_static_holds() {
    let model = RobotModel::default_5dof();
    let ds = static_holds_dataset(&model, 2, 14);
    let (k_s, _rms) = identify_stiffness(&ds, &model, &IdentConfig::default()).unwrap();
    for j in 0..5 {
        let rel = (k_s[j] - model.stiffness[j]).abs() / model.stiffness[j];
        assert!(rel < 0.005, "joint {j}: {} vs {} ({rel})", k_s[j], model.stiffness[j]);
    }
}

#[test]
fn stiffness_rank_deficiency_on_zero_excitation() {
    let model = RobotModel::default_5dof();
    let rows = 600;
    let ds = Dataset {
        rate: RATE,
        domain: Domain::training(),
        q: DMatrix::zeros(rows, 5),
        qd: DMatrix::zeros(rows, 5),
        p: DMatrix::from_element(rows, 10, 35_000.0),
        p_d: DMatrix::from_element(rows, 10, 35_000.0),
    };
    match identify_stiffness(&ds, &model, &IdentConfig::default()) {
        Err(bellows::Error::RankDeficient { joints }) => assert_eq!(joints.len(), 5),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn friction_recovery_from_multisine() {
    let model = RobotModel::default_5dof();
    let amps = [5.0 * DEG, 3.5 * DEG, 4.2 * DEG];
    let freqs = [0.31, 0.67];
    let phases = [0.0, 1.1, 2.3, 3.9, 4.7, 5.3, 0.7, 1.9, 2.9, 4.1];
    let motion = multisine(5, &amps, &freqs, &phases);
    let ds = dataset_from_motion(&model, Domain::new(0.08, 0.9).unwrap(), 240.0, motion);
    let (k_v, k_c, _) =
        identify_friction(&ds, &model, &model.stiffness, &IdentConfig::default()).unwrap();
    for j in 0..5 {
        let rv = (k_v[j] - model.viscous[j]).abs() / model.viscous[j];
        let rc = (k_c[j] - model.coulomb[j]).abs() / model.coulomb[j];
        assert!(rv < 0.02, "k_v joint {j}: rel {rv}");
        assert!(rc < 0.02, "k_C joint {j}: rel {rc}");
    }
}

#[test]
fn friction_collinear_single_velocity_is_flagged() {
    let model = RobotModel::chain(2);
    // constant positive velocity: the viscous and Coulomb columns are
    // proportional, so neither coefficient is identifiable
    let motion = |t: f64| {
        let qd = DVector::from_element(2, 3.0 * DEG);
        let q = DVector::from_fn(2, |j, _| -6.0 * DEG + 3.0 * DEG * t + j as f64 * 0.001);
        (q, qd, DVector::zeros(2))
    };
    let ds = dataset_from_motion(&model, Domain::training(), 3.5, motion);
    match identify_friction(&ds, &model, &model.stiffness, &IdentConfig::default()) {
        Err(bellows::Error::RankDeficient { joints }) => assert!(!joints.is_empty()),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn friction_estimate_variance_shrinks_with_data() {
    let model = RobotModel::chain(1);
    let amps = [6.0 * DEG];
    let freqs = [0.4, 0.9];
    let phases = [0.3, 2.1];
    let sigma = 500.0; // Pa of pressure noise
    let fit = |duration: f64, seed: u64| -> f64 {
        let motion = multisine(1, &amps, &freqs, &phases);
        let mut ds = dataset_from_motion(&model, Domain::training(), duration, motion);
        let mut rng = StdRng::seed_from_u64(seed);
        for r in 0..ds.len() {
            for c in 0..2 {
                ds.p[(r, c)] += sigma * (rng.random_range(-1.0..1.0f64));
            }
        }
        let (k_v, _, _) =
            identify_friction(&ds, &model, &model.stiffness, &IdentConfig::default()).unwrap();
        k_v[0]
    };
    let var = |duration: f64| -> f64 {
        let vals: Vec<f64> = (0..12).map(|s| fit(duration, 100 + s)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64
    };
    let v_short = var(30.0);
    let v_long = var(60.0);
    assert!(
        v_long < v_short,
        "variance should shrink with more data: {v_short} -> {v_long}"
    );
}

#[test]
fn contact_recovery_from_boundary_excursions() {
    let model = RobotModel::default_5dof();
    let amps = [14.0 * DEG, 12.5 * DEG];
    let freqs = [0.23, 0.49];
    let phases = [0.4, 1.7, 2.9, 4.2, 5.6];
    let motion = multisine(5, &amps, &freqs, &phases);
    let ds = dataset_from_motion(&model, Domain::new(0.02, 0.4).unwrap(), 240.0, motion);
    let (k_bs, k_bd, _) = identify_contact(
        &ds,
        &model,
        &model.stiffness,
        &model.viscous,
        &model.coulomb,
        &IdentConfig::default(),
    )
    .unwrap();
    let rbs = (k_bs - model.contact_stiffness).abs() / model.contact_stiffness;
    let rbd = (k_bd.unwrap() - model.contact_damping).abs() / model.contact_damping;
    assert!(rbs < 0.02, "k_bs rel {rbs}");
    assert!(rbd < 0.02, "k_bd rel {rbd}");
}

#[test]
fn contact_without_boundary_data_errors() {
    let model = RobotModel::default_5dof();
    let ds = static_holds_dataset(&model, 5, 4);
    assert!(identify_contact(
        &ds,
        &model,
        &model.stiffness,
        &model.viscous,
        &model.coulomb,
        &IdentConfig::default(),
    )
    .is_err());
}

#[test]
fn contact_static_boundary_pose_leaves_damping_unidentified() {
    let model = RobotModel::default_5dof();
    // one constant pose beyond the boundary on every joint
    let pose = DVector::from_element(5, 14.0 * DEG);
    let gain = model.pressure_area * model.lever_arm;
    let rows = 800;
    let dom = Domain::training();
    let tau = model.inverse_dynamics(&pose, &DVector::zeros(5), &DVector::zeros(5), &dom).unwrap();
    let mut q = DMatrix::zeros(rows, 5);
    let mut p = DMatrix::zeros(rows, 10);
    for r in 0..rows {
        for j in 0..5 {
            q[(r, j)] = pose[j];
            let dp = tau[j] / gain;
            p[(r, 2 * j)] = 35_000.0 + dp / 2.0;
            p[(r, 2 * j + 1)] = 35_000.0 - dp / 2.0;
        }
    }
    let ds = Dataset {
        rate: RATE,
        domain: dom,
        qd: DMatrix::zeros(rows, 5),
        p_d: p.clone(),
        p,
        q,
    };
    let (k_bs, k_bd, _) = identify_contact(
        &ds,
        &model,
        &model.stiffness,
        &model.viscous,
        &model.coulomb,
        &IdentConfig::default(),
    )
    .unwrap();
    assert!(k_bd.is_none(), "damping must be flagged unidentifiable");
    let rel = (k_bs - model.contact_stiffness).abs() / model.contact_stiffness;
    assert!(rel < 0.01, "k_bs rel {rel}");
}

#[test]
fn identify_all_empty_dataset_errors() {
    let model = RobotModel::default_5dof();
    let ds = Dataset {
        rate: RATE,
        domain: Domain::training(),
        q: DMatrix::zeros(0, 5),
        qd: DMatrix::zeros(0, 5),
        p: DMatrix::zeros(0, 10),
        p_d: DMatrix::zeros(0, 10),
    };
    assert!(matches!(
        identify_all(&ds, &model, &IdentConfig::default()),
        Err(bellows::Error::EmptyDataset)
    ));
}

#[test]
fn stiffness_estimate_is_least_squares_optimal() {
    let model = RobotModel::default_5dof();
    let ds = static_holds_dataset(&model, 7, 10);
    let cfg = IdentConfig::default();
    let (k_s, _) = identify_stiffness(&ds, &model, &cfg).unwrap();

    // recompute the residual of the static regression for a candidate k_s
    let kin = estimate_acceleration(&ds, cfg.cutoff_hz).unwrap();
    let residual = |k: &DVector<f64>| -> f64 {
        let mut sum = 0.0;
        for r in 0..kin.q.nrows() {
            let q = kin.q.row(r).transpose();
            let g = model.gravity_torques(&q, &ds.domain).unwrap();
            let p = ds.p.row(r + kin.offset).transpose();
            let tau = model.actuation_torques(&p).unwrap();
            for j in 0..5 {
                if kin.qd[(r, j)].abs() <= model.coulomb_threshold
                    && kin.q[(r, j)].abs() <= model.boundary_threshold
                {
                    let e = tau[j] - g[j] - k[j] * kin.q[(r, j)];
                    sum += e * e;
                }
            }
        }
        sum
    };
    let base = residual(&k_s);
    for j in 0..5 {
        for sign in [-1.0, 1.0] {
            let mut k = k_s.clone();
            k[j] *= 1.0 + sign * 0.01;
            assert!(
                residual(&k) >= base,
                "perturbing joint {j} by {sign}% must not reduce the residual"
            );
        }
    }
}

#[test]
fn cutoff_choice_barely_moves_the_estimates() {
    let model = RobotModel::default_5dof();
    let amps = [5.0 * DEG, 3.5 * DEG, 4.2 * DEG];
    let freqs = [0.31, 0.67];
    let phases = [0.0, 1.1, 2.3, 3.9, 4.7, 5.3, 0.7, 1.9, 2.9, 4.1];
    let motion = multisine(5, &amps, &freqs, &phases);
    let ds = dataset_from_motion(&model, Domain::training(), 150.0, motion);
    let mut fits = Vec::new();
    for cutoff in [4.0, 5.0, 6.0] {
        let cfg = IdentConfig {
            cutoff_hz: cutoff,
            ..IdentConfig::default()
        };
        let (k_v, _, _) = identify_friction(&ds, &model, &model.stiffness, &cfg).unwrap();
        fits.push(k_v);
    }
    for j in 0..5 {
        let spread = (fits[0][j] - fits[2][j]).abs() / fits[1][j].abs();
        assert!(spread < 0.02, "joint {j} cutoff sensitivity {spread}");
    }
}

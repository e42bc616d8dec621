use bellows::integrate::oracle_rollout;
use bellows::model::DEG;
use bellows::net::SurrogateModel;
use bellows::testbench::{generate_excitation, ExcitationProtocol};
use bellows::train::{train_pinn, FpScaled, TrainConfig};
use bellows::{Domain, RobotModel, State};
use rand::rngs::StdRng;
use rand::SeedableRng;
use std::time::Instant;

/// teacher-forced one-step error at on-manifold states, scaled units
fn one_step_err(model: &SurrogateModel, robot: &RobotModel, dom: &Domain, seed: u64) -> (f64, f64) {
    let protocol = ExcitationProtocol::test(10.0);
    let mut rng = StdRng::seed_from_u64(seed);
    let exc = generate_excitation(&protocol, robot.n, &mut rng).unwrap();
    let u = exc.to_inputs(50.0, 10.0);
    let x0 = State::zeros(robot.n);
    let truth = oracle_rollout(robot, dom, &x0, &u, 0.02).unwrap();
    let d_s = model.scaler.scale_domain(dom);
    let mut mean = 0.0;
    let mut max: f64 = 0.0;
    for k in 0..u.len() {
        let xs = model.scaler.scale_state(&truth.states[k]);
        let us = model.scaler.scale_input(&u[k]);
        let pred = model.predict_scaled(model.t_s, &xs, &us, &d_s).unwrap();
        let t_next = model.scaler.scale_state(&truth.states[k + 1]);
        let e = (pred - t_next).abs().max();
        mean += e;
        max = max.max(e);
    }
    (mean / u.len() as f64, max)
}

fn eval_mae(model: &SurrogateModel, robot: &RobotModel, dom: &Domain, seed: u64) -> (f64, f64) {
    let protocol = ExcitationProtocol::test(10.0);
    let mut rng = StdRng::seed_from_u64(seed);
    let exc = generate_excitation(&protocol, robot.n, &mut rng).unwrap();
    let u = exc.to_inputs(50.0, 10.0);
    let x0 = State::zeros(robot.n);
    let truth = oracle_rollout(robot, dom, &x0, &u, 0.02).unwrap();
    match model.self_loop_rollout(&x0, &u, dom) {
        Ok(pred) => {
            let mut eq = 0.0;
            let mut eqd = 0.0;
            let steps = truth.states.len();
            for k in 1..steps {
                eq += (truth.states[k].q.clone() - &pred.states[k].q).abs().sum() / 5.0;
                eqd += (truth.states[k].qd.clone() - &pred.states[k].qd).abs().sum() / 5.0;
            }
            (eq / (steps - 1) as f64 / DEG, eqd / (steps - 1) as f64 / DEG)
        }
        Err(e) => {
            println!("  rollout failed: {e}");
            (f64::NAN, f64::NAN)
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(150);
    let n_p: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20_000);
    let n_a: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20);
    let lr0: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let neurons: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(64);

    let robot = RobotModel::default_5dof();
    let cfg = TrainConfig {
        epochs,
        collocation_points: n_p,
        ansatz_terms: n_a,
        lr0,
        neurons,
        resample_every: 100,
        plateau_patience: 25,
        seed: 1,
        ..TrainConfig::desk_default()
    };
    let t0 = Instant::now();
    let (model, report) = train_pinn(5, &cfg, |sc| FpScaled::new(&robot, sc.clone()), None).unwrap();
    println!(
        "trained {} epochs in {:.1} s; L_p {:.4} -> {:.4}, best L_v {:.4}, excluded {:.3}%",
        epochs,
        t0.elapsed().as_secs_f64(),
        report.history.first().unwrap().l_p,
        report.history.last().unwrap().l_p,
        report.best_val,
        report.excluded_fraction * 100.0
    );
    for (i, s) in report.history.iter().enumerate() {
        if i % 25 == 0 || i + 1 == report.history.len() {
            println!("  epoch {:3}: L_p={:.4} L_v={:.4} lr={:.1e}", s.epoch, s.l_p, s.l_v, s.lr);
        }
    }
    for (name, dom) in [
        ("delta_t  [0g,  0deg]", Domain::training()),
        ("mid      [100g,45deg]", Domain::new(0.1, 45.0 * DEG).unwrap()),
        ("far      [200g,90deg]", Domain::new(0.2, 90.0 * DEG).unwrap()),
    ] {
        let (eq, eqd) = eval_mae(&model, &robot, &dom, 99);
        let (os_mean, os_max) = one_step_err(&model, &robot, &dom, 99);
        println!("{name}: MAE_q={eq:.3} deg  MAE_qd={eqd:.3} deg/s  one-step mean={os_mean:.4} max={os_max:.4} (scaled)");
    }
    let _ = model.save("/tmp/last_surrogate.json");
}

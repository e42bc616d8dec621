use bellows::integrate::*;
use bellows::*;
use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand::rngs::StdRng;

fn main() {
    let model = RobotModel::default_5dof();
    let dom = Domain::new(0.1, 0.8).unwrap();
    let mut rng = StdRng::seed_from_u64(21);
    let x0 = State::new(
        DVector::from_fn(5, |_, _| rng.random_range(-8.0 * DEG..8.0 * DEG)),
        DVector::from_fn(5, |_, _| rng.random_range(-20.0 * DEG..20.0 * DEG)),
    ).unwrap();
    let u = vec![Input::new(DVector::from_fn(10, |_, _| rng.random_range(0.0..70_000.0)))];
    for (name, cfg) in [
        ("euler20us", RolloutConfig::new(Scheme::Euler, 0.02, 1000).unwrap()),
        ("euler10us", RolloutConfig::new(Scheme::Euler, 0.02, 2000).unwrap()),
        ("euler5us", RolloutConfig::new(Scheme::Euler, 0.02, 4000).unwrap()),
        ("rk4_100us", RolloutConfig::new(Scheme::Rk4, 0.02, 200).unwrap()),
        ("rk4_20us", RolloutConfig::new(Scheme::Rk4, 0.02, 1000).unwrap()),
    ] {
        let tr = rollout_fp(&cfg, &model, &dom, &x0, &u).unwrap();
        let oracle = oracle_rollout(&model, &dom, &x0, &u, 0.02).unwrap();
        let dq = (tr.states[1].q.clone() - &oracle.states[1].q).abs().max() / DEG;
        let dqd = (tr.states[1].qd.clone() - &oracle.states[1].qd).abs().max() / DEG;
        println!("{name}: dq={dq:.6} deg  dqd={dqd:.6} deg/s");
    }
    // where do velocities end up?
    let oracle = oracle_rollout(&model, &dom, &x0, &u, 0.02).unwrap();
    println!("qd_end (deg/s): {:?}", oracle.states[1].qd.iter().map(|v| v / DEG).collect::<Vec<_>>());
}

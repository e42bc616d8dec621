use bellows::integrate::*;
use bellows::*;
use nalgebra::DVector;
use std::time::Instant;

fn main() {
    let model = RobotModel::default_5dof();
    let dom = Domain::new(0.1, 0.8).unwrap();
    let x0 = State::new(
        DVector::from_vec(vec![0.05, -0.1, 0.12, 0.02, -0.08]),
        DVector::from_vec(vec![0.1, 0.3, -0.2, 0.0, 0.15]),
    ).unwrap();
    let u: Vec<Input> = (0..500)
        .map(|k| Input::new(DVector::from_fn(10, |i, _| 35_000.0 + 20_000.0 * ((k + i) as f64 * 0.37).sin())))
        .collect();
    // 10 s at oracle grade = 8M evals
    let t = Instant::now();
    let tr = oracle_rollout(&model, &dom, &x0, &u, 0.02).unwrap();
    let dt = t.elapsed().as_secs_f64();
    let evals = 500.0 * 4000.0 * 4.0;
    println!("oracle 10 s: {:.2} s wall, {:.0} ns/eval, final q0={:.4}", dt, dt / evals * 1e9, tr.states[500].q[0]);
}

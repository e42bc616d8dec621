use bellows::dynamics::Scratch;
use bellows::{Domain, RobotModel};
use std::time::Instant;

fn main() {
    let model = RobotModel::default_5dof();
    let dom = Domain::new(0.1, 0.5).unwrap();
    let mut ws = Scratch::new(&model);
    let x = [0.1, -0.2, 0.15, 0.05, -0.1, 0.3, -0.2, 0.4, 0.1, -0.3];
    let p = [5e4, 2e4, 3e4, 4e4, 1e4, 6e4, 3e4, 3e4, 2e4, 5e4];
    let mut out = [0.0; 10];
    let n = 2_000_000;
    let t0 = Instant::now();
    let mut acc = 0.0;
    for i in 0..n {
        let mut xi = x;
        xi[0] += (i as f64) * 1e-9;
        model.state_derivative_into(&mut ws, &xi, &p, &dom, &mut out).unwrap();
        acc += out[5];
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("full eval: {:.1} ns/call (acc {acc:.3})", dt / n as f64 * 1e9);
}

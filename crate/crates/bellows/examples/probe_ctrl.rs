use bellows::control::*;
use bellows::model::DEG;
use bellows::net::{Boundaries, Head, SurrogateModel};
use bellows::{Domain, RobotModel};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

fn main() {
    let dom = Domain::training();
    let t_s = 0.02;
    let steps = (6.0 / t_s) as usize;
    let target = DVector::from_element(5, 5.0 * DEG);
    let reference = Reference { t_s, q_d: vec![target.clone(); steps], qd_d: vec![DVector::zeros(5); steps] };
    let pi = Controller::Pi { config: PiConfig::default_gains(5) };
    let mut ideal = RobotModel::default_5dof();
    ideal.coulomb.fill(0.0);
    let log = closed_loop(&ideal, &pi, &reference, &dom, 6.0).unwrap();
    for t in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.9] {
        let k = ((t / 1e-3) as usize).min(log.q.len()-1);
        let err = (&log.q[k] - &target).abs().max() / DEG;
        println!("ideal t={t:.1}s err={err:.4} deg");
    }

    let mut rng = StdRng::seed_from_u64(7);
    let s = SurrogateModel::new(5, 0.02, Boundaries::default(), Head::DdPinn { n_a: 4 }, 2, 24, &mut rng);
    let mut cfg = MpcConfig::default_for(&s, 0.7e5);
    cfg.r_input = 0.0;
    cfg.max_iters = 200;
    let mut rng = StdRng::seed_from_u64(8);
    for trial in 0..3 {
        let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.3..0.3));
        let u_star = DVector::from_fn(10, |_, _| rng.random_range(-0.4..0.4));
        let d = [0.0, 0.25];
        let mut q_d = Vec::new(); let mut qd_d = Vec::new();
        let mut x = x0.clone();
        for _ in 0..cfg.horizon {
            x = s.predict_scaled(s.t_s, &x, &u_star, &d).unwrap();
            q_d.push(x.rows(0, 5).into_owned());
            qd_d.push(x.rows(5, 5).into_owned());
        }
        let window = RefWindow { q_d, qd_d };
        let sol = mpc_solve(&x0, &window, &d, &s, &cfg, None).unwrap();
        println!("trial {trial}: cost={:.3e} pg={:.3e} iters={} err={:.5}", sol.cost, sol.projected_grad_norm, sol.iterations, (&sol.u - &u_star).abs().max());
    }
}

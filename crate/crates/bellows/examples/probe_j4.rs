use bellows::model::DEG;
use bellows::testbench::*;
use bellows::{Domain, RobotModel, State};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let model = RobotModel::default_5dof();
    let protocol = ExcitationProtocol::train(120.0);
    let mut rng = StdRng::seed_from_u64(20_001);
    let exc = generate_excitation(&protocol, 5, &mut rng).unwrap();
    let ds = simulate_plant(&model, &exc, &Domain::training(), &protocol, None, PlantFidelity::Fast).unwrap();
    let j = 4;
    let vel_scale = std::f64::consts::PI / model.coulomb_threshold;
    for t in [31.90f64, 31.94, 31.98, 32.02] {
        let r = (t * 50.0).round() as usize;
        let q = ds.q.row(r).transpose();
        let qd = ds.qd.row(r).transpose();
        let p = ds.p.row(r).transpose();
        let tau = model.actuation_torques(&p).unwrap();
        let g = model.gravity_torques(&q, &ds.domain).unwrap();
        let s = model.stiffness_torques(&q);
        let c = model.coriolis_torques(&q, &qd, &ds.domain).unwrap();
        let d = model.friction_torques(&qd);
        let b = model.contact_torques(&q, &qd);
        // solve the true instantaneous qdd from the full model
        let deriv = model.forward_dynamics(&State::new(q.clone(), qd.clone()).unwrap(), &bellows::Input::new(p.clone()), &ds.domain).unwrap();
        let m = model.mass_matrix(&q, &ds.domain).unwrap();
        let mq = (&m * &deriv.qdd)[j];
        println!(
            "t={t}: q4={:.3}° qd4={:.3}°/s | tau={:.4} g={:.4} s={:.4} c={:.4} d={:.4} b={:.4} Mqdd={:.4} qdd4={:.1}",
            q[j] / DEG, qd[j] / DEG, tau[j], g[j], s[j], c[j], d[j], b[j], mq, deriv.qdd[j]
        );
        println!("   all q: {:?}", q.iter().map(|v| (v / DEG * 100.0).round() / 100.0).collect::<Vec<_>>());
        println!("   all qd: {:?}", qd.iter().map(|v| (v / DEG * 100.0).round() / 100.0).collect::<Vec<_>>());
        let _ = vel_scale;
    }
}

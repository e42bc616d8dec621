use bellows::dataset::Dataset;
use bellows::ident::*;
use bellows::model::DEG;
use bellows::testbench::*;
use bellows::{Domain, RobotModel};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let dur: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(300.0);
    let model = RobotModel::default_5dof();
    let protocol = ExcitationProtocol::train(dur);
    let mut rng = StdRng::seed_from_u64(20_001);
    let exc = generate_excitation(&protocol, 5, &mut rng).unwrap();
    let ds = simulate_plant(&model, &exc, &Domain::training(), &protocol, None, PlantFidelity::Fast).unwrap();
    let res = identify_all(&ds, &model, &IdentConfig::default()).unwrap();
    let rel = |e: f64, t: f64| (e - t) / t * 100.0;
    for j in 0..5 {
        println!("joint {j}: k_s {:+.1}%  k_v {:+.1}%  k_C {:+.1}%", rel(res.k_s[j], model.stiffness[j]), rel(res.k_v[j], model.viscous[j]), rel(res.k_c[j], model.coulomb[j]));
    }
    println!("k_bs {:+.1}%  k_bd {:+.1}%", rel(res.k_bs, model.contact_stiffness), rel(res.k_bd, model.contact_damping));
    println!("fractions {:?} rms {:?}", res.subset_fractions, res.residual_rms);

    // friction-torque statistics on static-classified rows (truth channels)
    let mut count = 0usize;
    let mut mean_abs_d = 0.0;
    let mut corr_qd = 0.0;
    let mut mean_absqd = 0.0;
    for r in 0..ds.len() {
        for j in 0..5 {
            let q = ds.q[(r, j)];
            let qd = ds.qd[(r, j)];
            if qd.abs() <= model.coulomb_threshold && q.abs() <= model.boundary_threshold {
                let d = model.viscous[j] * qd + model.coulomb[j] * (qd * std::f64::consts::PI / model.coulomb_threshold).tanh();
                mean_abs_d += d.abs();
                corr_qd += d * q;
                mean_absqd += qd.abs() / DEG;
                count += 1;
            }
        }
    }
    println!(
        "static rows: {}  mean|d|={:.4} N,  E[d*q]={:.6},  mean|qd|={:.4} deg/s",
        count, mean_abs_d / count as f64, corr_qd / count as f64, mean_absqd / count as f64
    );
}

use bellows::dataset::Dataset;
use bellows::ident::*;
use bellows::model::DEG;
use bellows::{Domain, RobotModel};
use nalgebra::{DMatrix, DVector};

fn main() {
    let model = RobotModel::chain(2);
    let rate = 50.0;
    let rows = (3.5 * rate) as usize;
    let n = 2;
    let gain = model.pressure_area * model.lever_arm;
    let mut q = DMatrix::zeros(rows, n);
    let mut p = DMatrix::zeros(rows, 2 * n);
    for r in 0..rows {
        let t = r as f64 / rate;
        let qt = DVector::from_fn(n, |j, _| -6.0 * DEG + 3.0 * DEG * t + j as f64 * 0.001);
        let qdt = DVector::from_element(n, 3.0 * DEG);
        let tau = model.inverse_dynamics(&qt, &qdt, &DVector::zeros(n), &Domain::training()).unwrap();
        for j in 0..n {
            q[(r, j)] = qt[j];
            let dp = tau[j] / gain;
            p[(r, 2 * j)] = 35_000.0 + dp / 2.0;
            p[(r, 2 * j + 1)] = 35_000.0 - dp / 2.0;
        }
    }
    let ds = Dataset { rate, domain: Domain::training(), qd: DMatrix::zeros(rows, n), p_d: p.clone(), p, q };
    let kin = estimate_acceleration(&ds, 5.0).unwrap();
    // velocity spread across kept dynamic rows
    let mut min = f64::MAX; let mut max = f64::MIN;
    for r in 0..kin.qd.nrows() {
        let v = kin.qd[(r, 0)];
        if v.abs() > model.coulomb_threshold { min = min.min(v); max = max.max(v); }
    }
    println!("kept q̇ range: [{}, {}] deg/s, spread {:.3e}", min / DEG, max / DEG, (max - min) / DEG);
    let vel_scale = std::f64::consts::PI / model.coulomb_threshold;
    let rows2: Vec<f64> = (0..kin.qd.nrows()).map(|r| kin.qd[(r, 0)]).filter(|v| v.abs() > model.coulomb_threshold).collect();
    let a = DMatrix::from_fn(rows2.len(), 2, |r, c| if c == 0 { rows2[r] } else { (rows2[r] * vel_scale).tanh() });
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    println!("r11={:.3e} r22={:.3e} ratio={:.3e}", r[(0,0)].abs(), r[(1,1)].abs(), r[(1,1)].abs()/r[(0,0)].abs());
    match identify_friction(&ds, &model, &model.stiffness, &IdentConfig::default()) {
        Ok((kv, kc, _)) => println!("fit: kv={:?} kc={:?} (true {:.4} {:.4})", kv.as_slice(), kc.as_slice(), model.viscous[0], model.coulomb[0]),
        Err(e) => println!("err: {e}"),
    }
}

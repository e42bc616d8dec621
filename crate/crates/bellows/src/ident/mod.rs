//! Three-step least-squares identification of the joint parameters
//! `k = [k_s, k_v, k_C, k_bs, k_bd]` from a logged dataset.
//!
//! The dataset is split per joint and sample into three regimes: static
//! inside the soft boundaries (stiffness), dynamic inside (friction), and
//! outside the boundaries (contact). Each step fits a parameter-linear model
//! against the torque residual left by the previously identified terms.
//!
//! Positions are re-filtered offline (zero phase) and differentiated twice
//! for the acceleration term; the same filtered kinematics drive regime
//! classification and the regressors, which keeps the pipeline independent
//! of how the logger derived its velocity channel.

mod filter;

pub use filter::{estimate_acceleration, filtfilt, Kinematics};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{RobotModel, DEG};
use crate::types::Domain;

#[derive(Debug, Clone, Copy)]
pub struct IdentConfig {
    /// Zero-phase low-pass cutoff for the offline kinematics, Hz.
    pub cutoff_hz: f64,
    /// Relative rank tolerance for the pivoted least-squares solves.
    pub rank_tol: f64,
    /// Diagonal-ratio guard: a regressor whose pivoted R has
    /// `min|r_ii| / max|r_ii|` below this is treated as unidentifiable.
    /// Healthy excitation sits around 0.1 and worse-than-1e-3 fits return
    /// meaningless coefficients.
    pub cond_tol: f64,
    /// Extra passes of the three-step chain with the static-regime target
    /// refined by the current estimates.
    pub refine_passes: usize,
}

impl Default for IdentConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 5.0,
            rank_tol: 1e-10,
            cond_tol: 1e-3,
            refine_passes: 3,
        }
    }
}

/// Regime of one (row, joint) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `|q̇| ≤ q̇_C` and `|q| ≤ q_bt`: static, inside the boundaries.
    Static = 1,
    /// `|q̇| > q̇_C` and `|q| ≤ q_bt`: dynamic, inside the boundaries.
    Dynamic = 2,
    /// `|q| > q_bt`: in boundary contact.
    Contact = 3,
}

/// Per-row, per-joint regime masks. The three regimes are disjoint and cover
/// every pair; boundary contact takes precedence over the velocity test.
pub struct Partition {
    pub class: Vec<Vec<Regime>>,
}

impl Partition {
    pub fn fractions(&self) -> [f64; 3] {
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        for row in &self.class {
            for c in row {
                counts[(*c as usize) - 1] += 1;
                total += 1;
            }
        }
        counts.map(|c| c as f64 / total.max(1) as f64)
    }
}

fn classify(q: f64, qd: f64, model: &RobotModel) -> Regime {
    if q.abs() > model.boundary_threshold {
        Regime::Contact
    } else if qd.abs() > model.coulomb_threshold {
        Regime::Dynamic
    } else {
        Regime::Static
    }
}

/// Classify every (row, joint) pair of the dataset by its logged channels.
pub fn partition(dataset: &Dataset, model: &RobotModel) -> Partition {
    let class = (0..dataset.len())
        .map(|r| {
            (0..dataset.dof())
                .map(|j| classify(dataset.q[(r, j)], dataset.qd[(r, j)], model))
                .collect()
        })
        .collect();
    Partition { class }
}

/// Identified parameters in SI units, plus bookkeeping about the fit.
#[derive(Debug, Clone)]
pub struct IdentResult {
    pub k_s: DVector<f64>,
    pub k_v: DVector<f64>,
    pub k_c: DVector<f64>,
    pub k_bs: f64,
    pub k_bd: f64,
    /// Fractions of (row, joint) pairs in the static/dynamic/contact regimes.
    pub subset_fractions: [f64; 3],
    /// Residual RMS of each step's least squares, N·m.
    pub residual_rms: [f64; 3],
    /// Parameters that could not be identified from the data (zero regressor
    /// columns), named.
    pub unidentifiable: Vec<String>,
}

impl IdentResult {
    /// Copy the identified parameters into a robot model.
    pub fn apply_to(&self, model: &RobotModel) -> RobotModel {
        model.clone().with_identified(
            self.k_s.clone(),
            self.k_v.clone(),
            self.k_c.clone(),
            self.k_bs,
            self.k_bd,
        )
    }
}

/// Shared per-row quantities for the regression steps.
struct Prepared {
    domain: Domain,
    /// Filtered kinematics, trimmed.
    kin: Kinematics,
    /// Logged velocity channel on the trimmed window. The 50 Hz sampling
    /// cannot recover the light distal joints' fast velocity content by
    /// differentiation, so the regressors use the logged channel and only
    /// the acceleration comes from the offline filter.
    qd_log: DMatrix<f64>,
    /// Actuation torque per trimmed row (from measured pressures).
    tau: DMatrix<f64>,
    /// Gravity torque per trimmed row.
    grav: DMatrix<f64>,
    /// Regime per trimmed row and joint, from the logged channels.
    class: Vec<Vec<Regime>>,
}

fn prepare(dataset: &Dataset, model: &RobotModel, config: &IdentConfig) -> Result<Prepared> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset.validate()?;
    let kin = estimate_acceleration(dataset, config.cutoff_hz)?;
    let rows = kin.q.nrows();
    let n = model.n;
    let mut tau = DMatrix::zeros(rows, n);
    let mut grav = DMatrix::zeros(rows, n);
    let mut qd_log = DMatrix::zeros(rows, n);
    let mut class = Vec::with_capacity(rows);
    for r in 0..rows {
        let p = dataset.p.row(r + kin.offset).transpose();
        let t = model.actuation_torques(&p)?;
        let q = kin.q.row(r).transpose();
        let g = model.gravity_torques(&q, &dataset.domain)?;
        for j in 0..n {
            tau[(r, j)] = t[j];
            grav[(r, j)] = g[j];
            qd_log[(r, j)] = dataset.qd[(r + kin.offset, j)];
        }
        class.push(
            (0..n)
                .map(|j| {
                    classify(
                        dataset.q[(r + kin.offset, j)],
                        dataset.qd[(r + kin.offset, j)],
                        model,
                    )
                })
                .collect(),
        );
    }
    Ok(Prepared {
        domain: dataset.domain,
        kin,
        qd_log,
        tau,
        grav,
        class,
    })
}

/// Column-pivoted least squares with rank detection. Returns `None` for each
/// coefficient whose column is rank deficient at the given tolerance.
fn ranked_lstsq(a: &DMatrix<f64>, y: &DVector<f64>, tol: f64, cond_tol: f64) -> Vec<Option<f64>> {
    let cols = a.ncols();
    if a.nrows() < cols {
        return vec![None; cols];
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let rank_tol = (tol * r[(0, 0)].abs()).max(cond_tol * r[(0, 0)].abs()).max(1e-300);
    let full_rank = (0..cols).all(|i| r[(i, i)].abs() > rank_tol);
    if full_rank {
        // thin least squares: R z = Qᵀ y, then undo the column permutation
        let qty = qr.q().transpose() * y;
        let mut z = DVector::zeros(cols);
        for i in (0..cols).rev() {
            let mut v = qty[i];
            for k in i + 1..cols {
                v -= r[(i, k)] * z[k];
            }
            z[i] = v / r[(i, i)];
        }
        qr.p().inv_permute_rows(&mut z);
        return z.iter().map(|v| Some(*v)).collect();
    }
    // drop near-zero columns and re-solve with the survivors
    let norms: Vec<f64> = (0..cols).map(|c| a.column(c).norm()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let keep: Vec<usize> = (0..cols).filter(|&c| norms[c] > tol * max_norm).collect();
    let mut out = vec![None; cols];
    if keep.len() == cols {
        // all columns look nonzero yet R is deficient: genuine collinearity
        return out;
    }
    if !keep.is_empty() {
        let sub = DMatrix::from_fn(a.nrows(), keep.len(), |r_, c_| a[(r_, keep[c_])]);
        let vals = ranked_lstsq(&sub, y, tol, cond_tol);
        for (slot, v) in keep.iter().zip(vals) {
            out[*slot] = v;
        }
    }
    out
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }
}

/// Step one: per-joint stiffness from static in-boundary rows, the printed
/// single-pass form `τ_I = τ − g`.
pub fn identify_stiffness(
    dataset: &Dataset,
    model: &RobotModel,
    config: &IdentConfig,
) -> Result<(DVector<f64>, f64)> {
    let prep = prepare(dataset, model, config)?;
    identify_stiffness_prepared(&prep, model, config, None)
}

/// Friction estimates used to refine the static-regime target.
struct Refinement<'a> {
    k_v: &'a DVector<f64>,
    k_c: &'a DVector<f64>,
}

fn identify_stiffness_prepared(
    prep: &Prepared,
    model: &RobotModel,
    config: &IdentConfig,
    refine: Option<Refinement>,
) -> Result<(DVector<f64>, f64)> {
    let n = model.n;
    let rows_all = prep.kin.q.nrows();
    // On a plant with tanh friction the static regime creeps instead of
    // resting, so the nominally negligible terms are not. The refinement
    // passes subtract the model-known inertial/Coriolis torques and, once
    // friction estimates exist, the modeled friction from the target.
    let mut correction = DMatrix::zeros(rows_all, n);
    if refine.is_some() {
        let vel_scale = std::f64::consts::PI / model.coulomb_threshold;
        for r in 0..rows_all {
            if !(0..n).any(|j| prep.class[r][j] == Regime::Static) {
                continue;
            }
            let q = prep.kin.q.row(r).transpose();
            let qd = prep.kin.qd.row(r).transpose();
            let qdd = prep.kin.qdd.row(r).transpose();
            let m = model.mass_matrix(&q, &prep.domain)?;
            let mq = &m * &qdd;
            let c = model.coriolis_torques(&q, &qd, &prep.domain)?;
            for j in 0..n {
                let mut corr = mq[j] + c[j];
                if let Some(refine) = &refine {
                    let qd_j = prep.qd_log[(r, j)];
                    corr += refine.k_v[j] * qd_j
                        + refine.k_c[j] * (qd_j * vel_scale).tanh();
                }
                correction[(r, j)] = corr;
            }
        }
    }
    let mut k_s = DVector::zeros(n);
    let mut residuals = Vec::new();
    let mut bad = Vec::new();
    for j in 0..n {
        let rows: Vec<usize> = (0..rows_all)
            .filter(|&r| prep.class[r][j] == Regime::Static)
            .collect();
        if rows.len() < 3 {
            bad.push(j);
            continue;
        }
        let a = DMatrix::from_fn(rows.len(), 1, |r, _| prep.kin.q[(rows[r], j)]);
        let y = DVector::from_fn(rows.len(), |r, _| {
            prep.tau[(rows[r], j)] - prep.grav[(rows[r], j)] - correction[(rows[r], j)]
        });
        match ranked_lstsq(&a, &y, config.rank_tol, config.cond_tol)[0] {
            Some(k) => {
                k_s[j] = k;
                for r in 0..rows.len() {
                    residuals.push(y[r] - k * a[(r, 0)]);
                }
            }
            None => bad.push(j),
        }
    }
    if !bad.is_empty() {
        return Err(Error::RankDeficient { joints: bad });
    }
    Ok((k_s, rms(&residuals)))
}

/// Step two: per-joint viscous and Coulomb coefficients from dynamic
/// in-boundary rows, given the already-identified stiffness.
pub fn identify_friction(
    dataset: &Dataset,
    model: &RobotModel,
    k_s: &DVector<f64>,
    config: &IdentConfig,
) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let prep = prepare(dataset, model, config)?;
    identify_friction_prepared(&prep, model, k_s, config)
}

fn identify_friction_prepared(
    prep: &Prepared,
    model: &RobotModel,
    k_s: &DVector<f64>,
    config: &IdentConfig,
) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let n = model.n;
    let rows_all = prep.kin.q.nrows();
    // inertial and Coriolis torques are shared across joints; compute rows
    // that have at least one dynamic joint once
    let mut needed: Vec<bool> = vec![false; rows_all];
    for r in 0..rows_all {
        needed[r] = (0..n).any(|j| prep.class[r][j] == Regime::Dynamic);
    }
    let mut inertial = DMatrix::zeros(rows_all, n);
    for r in 0..rows_all {
        if !needed[r] {
            continue;
        }
        let q = prep.kin.q.row(r).transpose();
        let qd = prep.kin.qd.row(r).transpose();
        let qdd = prep.kin.qdd.row(r).transpose();
        let m = model.mass_matrix(&q, &prep.domain)?;
        let mq = &m * &qdd;
        let c = model.coriolis_torques(&q, &qd, &prep.domain)?;
        for j in 0..n {
            inertial[(r, j)] = mq[j] + c[j];
        }
    }
    let vel_scale = std::f64::consts::PI / model.coulomb_threshold;
    let mut k_v = DVector::zeros(n);
    let mut k_c = DVector::zeros(n);
    let mut residuals = Vec::new();
    let mut bad = Vec::new();
    for j in 0..n {
        let rows: Vec<usize> = (0..rows_all)
            .filter(|&r| prep.class[r][j] == Regime::Dynamic)
            .collect();
        if rows.len() < 4 {
            bad.push(j);
            continue;
        }
        let a = DMatrix::from_fn(rows.len(), 2, |r, c| {
            let qd = prep.qd_log[(rows[r], j)];
            if c == 0 {
                qd
            } else {
                (qd * vel_scale).tanh()
            }
        });
        let y = DVector::from_fn(rows.len(), |r, _| {
            let row = rows[r];
            prep.tau[(row, j)]
                - prep.grav[(row, j)]
                - k_s[j] * prep.kin.q[(row, j)]
                - inertial[(row, j)]
        });
        let sol = ranked_lstsq(&a, &y, config.rank_tol, config.cond_tol);
        match (sol[0], sol[1]) {
            (Some(v), Some(c)) => {
                k_v[j] = v;
                k_c[j] = c;
                for r in 0..rows.len() {
                    residuals.push(y[r] - v * a[(r, 0)] - c * a[(r, 1)]);
                }
            }
            _ => bad.push(j),
        }
    }
    if !bad.is_empty() {
        return Err(Error::RankDeficient { joints: bad });
    }
    Ok((k_v, k_c, rms(&residuals)))
}

/// Step three: shared contact stiffness/damping from rows outside the soft
/// boundaries, given all previously identified parameters. The damping
/// coefficient comes back as `None` when the data never moves in contact.
pub fn identify_contact(
    dataset: &Dataset,
    model: &RobotModel,
    k_s: &DVector<f64>,
    k_v: &DVector<f64>,
    k_c: &DVector<f64>,
    config: &IdentConfig,
) -> Result<(f64, Option<f64>, f64)> {
    let prep = prepare(dataset, model, config)?;
    identify_contact_prepared(&prep, model, k_s, k_v, k_c, config)
}

fn identify_contact_prepared(
    prep: &Prepared,
    model: &RobotModel,
    k_s: &DVector<f64>,
    k_v: &DVector<f64>,
    k_c: &DVector<f64>,
    config: &IdentConfig,
) -> Result<(f64, Option<f64>, f64)> {
    let n = model.n;
    let rows_all = prep.kin.q.nrows();
    let vel_scale = std::f64::consts::PI / model.coulomb_threshold;
    let mut a_rows = Vec::new();
    let mut y_rows = Vec::new();
    let mut contact_rows: Vec<usize> = Vec::new();
    for r in 0..rows_all {
        if (0..n).any(|j| prep.class[r][j] == Regime::Contact) {
            contact_rows.push(r);
        }
    }
    if contact_rows.is_empty() {
        return Err(Error::RankDeficient { joints: vec![] });
    }
    for &r in &contact_rows {
        let q = prep.kin.q.row(r).transpose();
        let qd = prep.kin.qd.row(r).transpose();
        let qdd = prep.kin.qdd.row(r).transpose();
        let m = model.mass_matrix(&q, &prep.domain)?;
        let mq = &m * &qdd;
        let c = model.coriolis_torques(&q, &qd, &prep.domain)?;
        for j in 0..n {
            if prep.class[r][j] != Regime::Contact {
                continue;
            }
            let qj = prep.kin.q[(r, j)];
            let qdj = prep.qd_log[(r, j)];
            let pen = qj.abs() - model.boundary_threshold;
            if pen <= 0.0 {
                // the logged and filtered positions straddle the boundary
                continue;
            }
            a_rows.push([qj.signum() * pen * pen.sqrt(), pen.sqrt() * qdj]);
            y_rows.push(
                prep.tau[(r, j)]
                    - prep.grav[(r, j)]
                    - k_s[j] * qj
                    - mq[j]
                    - c[j]
                    - k_v[j] * qdj
                    - k_c[j] * (qdj * vel_scale).tanh(),
            );
        }
    }
    let a = DMatrix::from_fn(a_rows.len(), 2, |r, c| a_rows[r][c]);
    let y = DVector::from_vec(y_rows);
    let sol = ranked_lstsq(&a, &y, config.rank_tol, config.cond_tol);
    let k_bs = sol[0].ok_or(Error::RankDeficient { joints: vec![] })?;
    let k_bd = sol[1];
    let mut residuals = Vec::with_capacity(a.nrows());
    for r in 0..a.nrows() {
        residuals.push(y[r] - k_bs * a[(r, 0)] - k_bd.unwrap_or(0.0) * a[(r, 1)]);
    }
    Ok((k_bs, k_bd, rms(&residuals)))
}

/// The complete three-step identification, gravity evaluated in the
/// dataset's tagged domain.
///
/// The chain is run to a fixed point: the first pass uses the printed
/// static-regime target `τ − g`, and subsequent passes subtract the measured
/// inertial/Coriolis torques plus the currently identified friction from it.
/// Without this the creeping static regime of the tanh friction model biases
/// the stiffness estimate by the friction plateau.
pub fn identify_all(
    dataset: &Dataset,
    model: &RobotModel,
    config: &IdentConfig,
) -> Result<IdentResult> {
    let prep = prepare(dataset, model, config)?;
    let (mut k_s, mut rms1) = identify_stiffness_prepared(&prep, model, config, None)?;
    let (mut k_v, mut k_c, mut rms2) =
        identify_friction_prepared(&prep, model, &k_s, config)?;
    let (mut k_bs, mut k_bd, mut rms3) =
        identify_contact_prepared(&prep, model, &k_s, &k_v, &k_c, config)?;
    for _ in 0..config.refine_passes {
        let refined = identify_stiffness_prepared(
            &prep,
            model,
            config,
            Some(Refinement {
                k_v: &k_v,
                k_c: &k_c,
            }),
        )?;
        k_s = refined.0;
        rms1 = refined.1;
        let friction = identify_friction_prepared(&prep, model, &k_s, config)?;
        k_v = friction.0;
        k_c = friction.1;
        rms2 = friction.2;
        let contact = identify_contact_prepared(&prep, model, &k_s, &k_v, &k_c, config)?;
        k_bs = contact.0;
        k_bd = contact.1;
        rms3 = contact.2;
    }
    let mut counts = [0usize; 3];
    let mut total = 0usize;
    for row in &prep.class {
        for c in row {
            counts[(*c as usize) - 1] += 1;
            total += 1;
        }
    }
    let mut unidentifiable = Vec::new();
    if k_bd.is_none() {
        unidentifiable.push("k_bd".to_string());
    }
    Ok(IdentResult {
        k_s,
        k_v,
        k_c,
        k_bs,
        k_bd: k_bd.unwrap_or(0.0),
        subset_fractions: counts.map(|c| c as f64 / total.max(1) as f64),
        residual_rms: [rms1, rms2, rms3],
        unidentifiable,
    })
}

const IDENT_SCHEMA: &str = "ident-result/1";

#[derive(Serialize, Deserialize)]
struct IdentFile {
    schema: String,
    units: serde_json::Value,
    k_s: Vec<f64>,
    k_v: Vec<f64>,
    #[serde(rename = "k_C")]
    k_c: Vec<f64>,
    k_bs: f64,
    k_bd: f64,
    subset_fractions: [f64; 3],
    residual_rms: [f64; 3],
    unidentifiable: Vec<String>,
}

impl IdentResult {
    /// Degree-based units at the file boundary, like every other artifact.
    pub fn to_json(&self) -> Result<String> {
        let file = IdentFile {
            schema: IDENT_SCHEMA.into(),
            units: serde_json::json!({
                "k_s": "N m/deg", "k_v": "N m s/deg", "k_C": "N m",
                "k_bs": "N m/deg^(3/2)", "k_bd": "N m s/deg^(3/2)",
                "residual_rms": "N m",
            }),
            k_s: self.k_s.iter().map(|k| k * DEG).collect(),
            k_v: self.k_v.iter().map(|k| k * DEG).collect(),
            k_c: self.k_c.iter().cloned().collect(),
            k_bs: self.k_bs * DEG.powf(1.5),
            k_bd: self.k_bd * DEG.powf(1.5),
            subset_fractions: self.subset_fractions,
            residual_rms: self.residual_rms,
            unidentifiable: self.unidentifiable.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: IdentFile = serde_json::from_str(text)?;
        if file.schema != IDENT_SCHEMA {
            return Err(Error::Schema {
                expected: IDENT_SCHEMA.into(),
                found: file.schema,
            });
        }
        Ok(Self {
            k_s: DVector::from_iterator(file.k_s.len(), file.k_s.iter().map(|k| k / DEG)),
            k_v: DVector::from_iterator(file.k_v.len(), file.k_v.iter().map(|k| k / DEG)),
            k_c: DVector::from_vec(file.k_c),
            k_bs: file.k_bs / DEG.powf(1.5),
            k_bd: file.k_bd / DEG.powf(1.5),
            subset_fractions: file.subset_fractions,
            residual_rms: file.residual_rms,
            unidentifiable: file.unidentifiable,
        })
    }
}

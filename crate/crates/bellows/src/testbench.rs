//! Synthetic data generation, the simulated plant, generalization grids, and
//! the prediction-speed benchmark.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::integrate::{
    oracle_rollout, rollout_fp, FpSystem, RolloutConfig, Scheme, Stepper, ORACLE_STEP,
};
use crate::model::{RobotModel, DEG};
use crate::net::{GruModel, SurrogateModel};
use crate::types::{Domain, Input, State};

/// Random hold-and-ramp pressure excitation.
#[derive(Debug, Clone, Copy)]
pub struct ExcitationProtocol {
    /// Hold time per pressure combination, s (3 s for training data, 1 s for
    /// the more dynamic test data).
    pub hold_time: f64,
    /// Linear transition between combinations, s.
    pub transition_time: f64,
    /// Upper pressure bound, Pa.
    pub pressure_cap: f64,
    /// Plant logging rate, Hz.
    pub log_rate: f64,
    /// Dataset output rate after downsampling, Hz.
    pub output_rate: f64,
    pub duration: f64,
}

impl ExcitationProtocol {
    pub fn train(duration: f64) -> Self {
        Self {
            hold_time: 3.0,
            transition_time: 1.0,
            pressure_cap: 0.7e5,
            log_rate: 1000.0,
            output_rate: 50.0,
            duration,
        }
    }

    pub fn test(duration: f64) -> Self {
        Self {
            hold_time: 1.0,
            ..Self::train(duration)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.transition_time > self.hold_time + self.transition_time {
            return Err(Error::Config("transition exceeds the hold spacing".into()));
        }
        let factor = self.log_rate / self.output_rate;
        if (factor - factor.round()).abs() > 1e-9 || factor < 1.0 {
            return Err(Error::Config(
                "log rate must be an integer multiple of the output rate".into(),
            ));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        Ok(())
    }
}

/// Piecewise hold-ramp pressure profiles for every bellows, evaluable at any
/// time without materializing the whole log.
#[derive(Debug, Clone)]
pub struct Excitation {
    /// Knot values per channel; knot `k` holds from `k·period + transition`
    /// to `(k+1)·period`.
    levels: Vec<Vec<f64>>,
    period: f64,
    transition: f64,
}

impl Excitation {
    pub fn channels(&self) -> usize {
        self.levels.len()
    }

    /// Pressure of every bellows at time `t`.
    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        let seg = (t / self.period).floor().max(0.0) as usize;
        let phase = t - seg as f64 * self.period;
        for (c, lv) in self.levels.iter().enumerate() {
            let seg = seg.min(lv.len() - 2);
            let (prev, next) = (lv[seg], lv[seg + 1]);
            out[c] = if phase < self.transition {
                prev + (next - prev) * phase / self.transition
            } else {
                next
            };
        }
    }

    pub fn sample(&self, t: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.channels());
        self.sample_into(t, v.as_mut_slice());
        v
    }

    /// Materialize as zero-order-hold inputs on a fixed grid.
    pub fn to_inputs(&self, rate: f64, duration: f64) -> Vec<Input> {
        let steps = (duration * rate).round() as usize;
        (0..steps)
            .map(|k| Input::new(self.sample(k as f64 / rate)))
            .collect()
    }
}

/// Draw random pressure combinations per bellows under the protocol.
pub fn generate_excitation(
    protocol: &ExcitationProtocol,
    n_joints: usize,
    rng: &mut StdRng,
) -> Result<Excitation> {
    protocol.validate()?;
    let period = protocol.hold_time + protocol.transition_time;
    let segments = (protocol.duration / period).ceil() as usize + 2;
    let levels = (0..2 * n_joints)
        .map(|_| {
            (0..segments + 1)
                .map(|_| rng.random_range(0.0..protocol.pressure_cap))
                .collect()
        })
        .collect();
    Ok(Excitation {
        levels,
        period,
        transition: protocol.transition_time,
    })
}

/// Measurement imperfections of the simulated plant.
#[derive(Debug, Clone, Copy)]
pub struct SensorModel {
    /// Encoder resolution, rad.
    pub encoder_quantum: f64,
    /// Pressure resolution, Pa.
    pub pressure_quantum: f64,
    /// `Some(f)`: derive the logged velocity online by differentiating the
    /// f-Hz first-order-filtered encoder reading, the way a bench does.
    /// `None`: log the exact joint velocity.
    pub velocity_from_filtered_position: Option<f64>,
    /// Optional first-order lag between commanded and acting pressure, s.
    pub pressure_lag: Option<f64>,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            encoder_quantum: 0.09 * DEG,
            pressure_quantum: 500.0,
            velocity_from_filtered_position: None,
            pressure_lag: None,
        }
    }
}

impl SensorModel {
    /// Bench-style sensing: quantization plus the online velocity estimate
    /// from a 1 Hz-filtered position, plus a valve lag in the given range.
    pub fn bench_style() -> Self {
        Self {
            velocity_from_filtered_position: Some(1.0),
            pressure_lag: Some(0.04),
            ..Self::default()
        }
    }
}

/// Integration fidelity of the plant between log samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantFidelity {
    /// RK4 at the 5 µs oracle step.
    Oracle,
    /// RK4 at 20 µs: still inside the scheme's stability bound for the
    /// friction stiffness (unlike explicit Euler at this step, which
    /// chatters in the stiction band), at a quarter of the oracle cost.
    /// Suited to long logs.
    Fast,
}

fn quantize(v: f64, quantum: f64) -> f64 {
    (v / quantum).round() * quantum
}

/// Run the plant under an excitation and log a dataset at the output rate.
///
/// With `sensors = None` the log contains the exact plant state; otherwise
/// quantization, the position filter, the derived velocity channel, and the
/// optional pressure lag are applied.
pub fn simulate_plant(
    model: &RobotModel,
    excitation: &Excitation,
    domain: &Domain,
    protocol: &ExcitationProtocol,
    sensors: Option<&SensorModel>,
    fidelity: PlantFidelity,
) -> Result<Dataset> {
    protocol.validate()?;
    let n = model.n;
    let log_steps = (protocol.duration * protocol.log_rate).round() as usize;
    let dt_log = 1.0 / protocol.log_rate;
    let (scheme, h) = match fidelity {
        PlantFidelity::Oracle => (Scheme::Rk4, ORACLE_STEP),
        PlantFidelity::Fast => (Scheme::Rk4, 20e-6),
    };
    let substeps = (dt_log / h).round().max(1.0) as usize;

    let mut sys = FpSystem::new(model, *domain);
    let mut stepper = Stepper::new(2 * n);
    let mut x = vec![0.0; 2 * n];
    let mut p_d = vec![0.0; 2 * n];
    let mut p_act = vec![0.0; 2 * n];
    excitation.sample_into(0.0, &mut p_d);
    p_act.copy_from_slice(&p_d);

    let mut q_log = DMatrix::zeros(log_steps, n);
    let mut qd_log = DMatrix::zeros(log_steps, n);
    let mut p_log = DMatrix::zeros(log_steps, 2 * n);
    let mut pd_log = DMatrix::zeros(log_steps, 2 * n);

    // sensor state
    let mut q_filt = vec![0.0; n];
    let mut q_filt_prev = vec![0.0; n];
    let alpha_pos = sensors.and_then(|s| s.velocity_from_filtered_position).map(|hz| {
        let tau = 1.0 / (2.0 * std::f64::consts::PI * hz);
        dt_log / (tau + dt_log)
    });

    for k in 0..log_steps {
        let t = k as f64 * dt_log;
        excitation.sample_into(t, &mut p_d);
        match sensors.and_then(|s| s.pressure_lag) {
            Some(tau) => {
                let a = dt_log / (tau + dt_log);
                for c in 0..2 * n {
                    p_act[c] += a * (p_d[c] - p_act[c]);
                }
            }
            None => p_act.copy_from_slice(&p_d),
        }

        // log the sample at time t, then integrate to t + dt
        match sensors {
            None => {
                for j in 0..n {
                    q_log[(k, j)] = x[j];
                    qd_log[(k, j)] = x[n + j];
                }
                for c in 0..2 * n {
                    p_log[(k, c)] = p_act[c];
                    pd_log[(k, c)] = p_d[c];
                }
            }
            Some(s) => {
                for j in 0..n {
                    let q_meas = quantize(x[j], s.encoder_quantum);
                    q_log[(k, j)] = q_meas;
                    match alpha_pos {
                        Some(a) => {
                            if k == 0 {
                                q_filt[j] = q_meas;
                                q_filt_prev[j] = q_meas;
                            }
                            let prev = q_filt[j];
                            q_filt[j] += a * (q_meas - q_filt[j]);
                            q_filt_prev[j] = prev;
                            qd_log[(k, j)] = (q_filt[j] - q_filt_prev[j]) / dt_log;
                        }
                        None => qd_log[(k, j)] = x[n + j],
                    }
                }
                for c in 0..2 * n {
                    p_log[(k, c)] = quantize(p_act[c], s.pressure_quantum);
                    pd_log[(k, c)] = p_d[c];
                }
            }
        }

        for _ in 0..substeps {
            stepper.step(scheme, &mut sys, &mut x, &p_act, h)?;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::Diverged {
                step: k,
                what: "plant state left the sane range".into(),
            });
        }
    }

    let full = Dataset {
        rate: protocol.log_rate,
        domain: *domain,
        q: q_log,
        qd: qd_log,
        p: p_log,
        p_d: pd_log,
    };
    full.downsample((protocol.log_rate / protocol.output_rate).round() as usize)
}

/// The twelve-cell payload × tilt evaluation grid.
pub fn domain_grid() -> Vec<Domain> {
    let mut cells = Vec::new();
    for &beta_deg in &[0.0, 45.0, 90.0] {
        for &me_g in &[0.0, 50.0, 100.0, 200.0] {
            cells.push(Domain::new(me_g / 1000.0, beta_deg * DEG).unwrap());
        }
    }
    cells
}

/// Anything that can self-loop over a `T_s` input grid.
pub enum EvalModel<'a> {
    /// First-principles model integrated per macro step.
    Fp(RolloutConfig),
    Surrogate(&'a SurrogateModel),
    Gru(&'a GruModel),
}

pub struct GenCell {
    pub domain: Domain,
    /// MAE of predicted vs true positions, rad, averaged over joints & steps.
    pub mae_q: f64,
    /// Same for velocities, rad/s.
    pub mae_qd: f64,
    pub failed: bool,
}

pub struct GenReport {
    pub model_names: Vec<String>,
    /// `cells[m][d]` is model `m` evaluated in grid domain `d`.
    pub cells: Vec<Vec<GenCell>>,
}

impl GenReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,me_kg,beta_deg,mae_q_deg,mae_qd_degs,failed\n");
        for (name, row) in self.model_names.iter().zip(&self.cells) {
            for cell in row {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    name,
                    cell.domain.payload,
                    cell.domain.tilt / DEG,
                    cell.mae_q / DEG,
                    cell.mae_qd / DEG,
                    cell.failed
                ));
            }
        }
        out
    }
}

fn mae_against(truth: &[State], pred: &[State]) -> (f64, f64) {
    let steps = truth.len().min(pred.len());
    let n = truth[0].dof();
    let mut eq = 0.0;
    let mut eqd = 0.0;
    for k in 1..steps {
        for j in 0..n {
            eq += (truth[k].q[j] - pred[k].q[j]).abs();
            eqd += (truth[k].qd[j] - pred[k].qd[j]).abs();
        }
    }
    let count = ((steps - 1) * n) as f64;
    (eq / count, eqd / count)
}

/// Simulate the test excitation in every grid domain and score each model's
/// self-loop prediction against the fine-step oracle.
pub fn evaluate_generalization(
    models: &[(String, EvalModel)],
    robot: &RobotModel,
    grid: &[Domain],
    duration: f64,
    t_s: f64,
    seed: u64,
) -> Result<GenReport> {
    let per_cell: Vec<(Vec<State>, Vec<Input>, Domain)> = grid
        .par_iter()
        .map(|dom| {
            let mut rng = StdRng::seed_from_u64(seed ^ (dom.payload * 1e5) as u64 ^ ((dom.tilt * 1e3) as u64) << 16);
            let protocol = ExcitationProtocol::test(duration);
            let exc = generate_excitation(&protocol, robot.n, &mut rng)?;
            let u_ts = exc.to_inputs(1.0 / t_s, duration);
            let truth = oracle_rollout(robot, dom, &State::zeros(robot.n), &u_ts, t_s)?;
            Ok((truth.states, u_ts, *dom))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (_, model) in models {
        let row: Vec<GenCell> = per_cell
            .par_iter()
            .map(|(truth, u_ts, dom)| {
                let pred = match model {
                    EvalModel::Fp(cfg) => {
                        rollout_fp(cfg, robot, dom, &State::zeros(robot.n), u_ts).map(|t| t.states)
                    }
                    EvalModel::Surrogate(s) => {
                        s.self_loop_rollout(&State::zeros(robot.n), u_ts, dom).map(|t| t.states)
                    }
                    EvalModel::Gru(g) => {
                        g.self_loop_rollout(&State::zeros(robot.n), u_ts).map(|t| t.states)
                    }
                };
                match pred {
                    Ok(states) => {
                        let (mae_q, mae_qd) = mae_against(truth, &states);
                        GenCell { domain: *dom, mae_q, mae_qd, failed: false }
                    }
                    Err(_) => GenCell { domain: *dom, mae_q: f64::NAN, mae_qd: f64::NAN, failed: true },
                }
            })
            .collect();
        cells.push(row);
    }
    Ok(GenReport {
        model_names: models.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}

pub struct SpeedRow {
    pub method: String,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub min_ms: f64,
    pub n_calls: usize,
}

pub struct SpeedTable {
    pub rows: Vec<SpeedRow>,
}

impl SpeedTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean_ms,max_ms,min_ms,n_calls\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.method, r.mean_ms, r.max_ms, r.min_ms, r.n_calls
            ));
        }
        out
    }

    pub fn mean_of(&self, method: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method).map(|r| r.mean_ms)
    }
}

/// Time one-horizon predictions over a shared input trajectory.
///
/// Every method self-loops its own state; each measurement covers exactly one
/// macro step `t_s`. The first `warmup` horizons are excluded from the
/// statistics. Strictly single-threaded.
pub fn bench_speed(
    surrogates: &[(String, &SurrogateModel)],
    integrators: &[(String, RolloutConfig)],
    robot: &RobotModel,
    domain: &Domain,
    duration: f64,
    t_s: f64,
    seed: u64,
) -> Result<SpeedTable> {
    let horizons = (duration / t_s).round() as usize;
    let warmup = 100.min(horizons / 10);
    let mut rng = StdRng::seed_from_u64(seed);
    let protocol = ExcitationProtocol::test(duration);
    let exc = generate_excitation(&protocol, robot.n, &mut rng)?;
    let u_ts = exc.to_inputs(1.0 / t_s, duration);
    let x0 = State::zeros(robot.n);

    let mut rows = Vec::new();
    for (name, surrogate) in surrogates {
        let d_s = surrogate.scaler.scale_domain(domain);
        let mut x_s = surrogate.scaler.scale_state(&x0);
        let mut samples = Vec::with_capacity(horizons);
        for u in &u_ts {
            let u_s = surrogate.scaler.scale_input(u);
            let t0 = std::time::Instant::now();
            x_s = surrogate.predict_scaled(t_s, &x_s, &u_s, &d_s)?;
            samples.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        rows.push(stats_row(name, &samples[warmup..], 1));
    }
    for (name, cfg) in integrators {
        let mut sys = FpSystem::new(robot, *domain);
        let mut stepper = Stepper::new(2 * robot.n);
        let mut x = x0.to_vector().as_slice().to_vec();
        let h = cfg.h_step();
        let mut samples = Vec::with_capacity(horizons);
        for u in &u_ts {
            let t0 = std::time::Instant::now();
            for _ in 0..cfg.substeps {
                stepper.step(cfg.scheme, &mut sys, &mut x, u.p_d.as_slice(), h)?;
            }
            samples.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        rows.push(stats_row(name, &samples[warmup..], cfg.substeps));
    }
    Ok(SpeedTable { rows })
}

fn stats_row(name: &str, samples: &[f64], n_calls: usize) -> SpeedRow {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    SpeedRow {
        method: name.to_string(),
        mean_ms: mean,
        max_ms: samples.iter().cloned().fold(f64::MIN, f64::max),
        min_ms: samples.iter().cloned().fold(f64::MAX, f64::min),
        n_calls,
    }
}

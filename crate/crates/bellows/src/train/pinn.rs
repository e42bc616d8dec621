//! Physics-informed training loop.
//!
//! One run covers both heads: collocation points are resampled on a fixed
//! interval, shuffled together with any measured one-step data, chunked into
//! batches, and split 70/30 into train and validation batches. Every batch
//! contributes its weighted loss terms; Adam updates on train batches only.
//! After the first epoch the loss weights are recalibrated from the observed
//! term means, and the learning rate halves on validation plateaus until it
//! reaches its floor. The returned weights are the best-validation ones.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::net::scaler::{Boundaries, Scaler};
use crate::net::surrogate::{Head, SurrogateModel};
use crate::train::adam::Adam;
use crate::train::collocation::{sample_collocation, CollocationSet};
use crate::train::loss::{
    calibrate_weights, data_loss, data_loss_grad, ic_loss, ic_loss_grad, physics_loss,
    physics_loss_grad, ScaledDynamics,
};

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Training epochs n_e.
    pub epochs: usize,
    /// Collocation resampling interval n_s, epochs.
    pub resample_every: usize,
    /// Collocation point count n_p.
    pub collocation_points: usize,
    /// Initial-condition point count n_0 (direct head only).
    pub ic_points: usize,
    /// Batch size n_b.
    pub batch_size: usize,
    /// Ansatz term count n_a; zero selects the direct head.
    pub ansatz_terms: usize,
    /// Plateau patience n_λ, epochs.
    pub plateau_patience: usize,
    /// Initial and minimum learning rates.
    pub lr0: f64,
    pub lr_min: f64,
    /// Core architecture.
    pub hidden_layers: usize,
    pub neurons: usize,
    pub boundaries: Boundaries,
    pub t_s: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults: small enough to train in minutes, big enough to
    /// track the plant to a few degrees over long self-loop rollouts.
    pub fn desk_default() -> Self {
        Self {
            epochs: 300,
            resample_every: 250,
            collocation_points: 20_000,
            ic_points: 4_000,
            batch_size: 512,
            ansatz_terms: 20,
            plateau_patience: 30,
            lr0: 1e-3,
            lr_min: 5e-5,
            hidden_layers: 2,
            neurons: 64,
            boundaries: Boundaries::default(),
            t_s: 0.02,
            seed: 0,
        }
    }

    pub fn head(&self) -> Head {
        if self.ansatz_terms == 0 {
            Head::Pinc
        } else {
            Head::DdPinn {
                n_a: self.ansatz_terms,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > self.collocation_points {
            return Err(Error::Config(
                "need 0 < batch_size <= collocation_points".into(),
            ));
        }
        if self.lr_min > self.lr0 {
            return Err(Error::Config("lr_min must not exceed lr0".into()));
        }
        if self.boundaries.kappa < 1.0 {
            return Err(Error::Config("kappa must be >= 1".into()));
        }
        if self.epochs == 0 || self.resample_every == 0 {
            return Err(Error::Config("epochs and resample interval must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub l_d: f64,
    pub l_p: f64,
    pub l_0: f64,
    pub l_v: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_val: f64,
    /// Fraction of collocation evaluations dropped for non-finite plant
    /// output; flagged when above one percent.
    pub excluded_fraction: f64,
    pub excluded_flag: bool,
}

impl TrainReport {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,L_d,L_p,L_0,L_v,lambda\n");
        for s in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.epoch, s.l_d, s.l_p, s.l_0, s.l_v, s.lr
            ));
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Data(usize),
    Colloc(usize),
    Ic(usize),
}

struct Batch {
    colloc: Option<DMatrix<f64>>,
    ic: Option<DMatrix<f64>>,
    data: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn build_batches(
    set: &CollocationSet,
    ic_points: usize,
    data: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
    batch_size: usize,
    pinc: bool,
    rng: &mut StdRng,
) -> (Vec<Batch>, Vec<Batch>) {
    let n_p = set.count();
    let mut tags: Vec<Kind> = (0..n_p).map(Kind::Colloc).collect();
    if pinc {
        tags.extend((0..ic_points.min(n_p)).map(Kind::Ic));
    }
    if let Some((pts, _)) = data {
        tags.extend((0..pts.ncols()).map(Kind::Data));
    }
    tags.shuffle(rng);

    let mut batches = Vec::new();
    for chunk in tags.chunks(batch_size) {
        let colloc_idx: Vec<usize> = chunk
            .iter()
            .filter_map(|k| match k {
                Kind::Colloc(i) => Some(*i),
                _ => None,
            })
            .collect();
        let ic_idx: Vec<usize> = chunk
            .iter()
            .filter_map(|k| match k {
                Kind::Ic(i) => Some(*i),
                _ => None,
            })
            .collect();
        let data_idx: Vec<usize> = chunk
            .iter()
            .filter_map(|k| match k {
                Kind::Data(i) => Some(*i),
                _ => None,
            })
            .collect();
        let gather = |idx: &[usize], src: &DMatrix<f64>| {
            DMatrix::from_fn(src.nrows(), idx.len(), |r, c| src[(r, idx[c])])
        };
        batches.push(Batch {
            colloc: (!colloc_idx.is_empty()).then(|| gather(&colloc_idx, &set.points)),
            ic: (!ic_idx.is_empty()).then(|| {
                let mut m = gather(&ic_idx, &set.points);
                for c in 0..m.ncols() {
                    m[(0, c)] = -1.0; // physical t = 0
                }
                m
            }),
            data: data.and_then(|(pts, targets)| {
                (!data_idx.is_empty())
                    .then(|| (gather(&data_idx, pts), gather(&data_idx, targets)))
            }),
        });
    }
    let n_train = ((batches.len() as f64) * 0.7).round().max(1.0) as usize;
    let val = batches.split_off(n_train.min(batches.len()));
    (batches, val)
}

/// Scaled `(x0, u0, δ)` columns and next-state targets from a measured log.
fn dataset_to_columns(ds: &Dataset, scaler: &Scaler) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ds.dof();
    let rows = ds.len().saturating_sub(1);
    let d_s = scaler.scale_domain(&ds.domain);
    let mut pts = DMatrix::zeros(4 * n + 3, rows);
    let mut targets = DMatrix::zeros(2 * n, rows);
    for k in 0..rows {
        let x = scaler.scale_state(&ds.state(k));
        let u = scaler.scale_input(&ds.input(k));
        let x1 = scaler.scale_state(&ds.state(k + 1));
        for i in 0..2 * n {
            pts[(1 + i, k)] = x[i];
            pts[(1 + 2 * n + i, k)] = u[i];
            targets[(i, k)] = x1[i];
        }
        pts[(1 + 4 * n, k)] = d_s[0];
        pts[(2 + 4 * n, k)] = d_s[1];
    }
    (pts, targets)
}

/// Train a surrogate against scaled plant dynamics built from the scaler
/// (pass [`crate::train::loss::FpScaled::new`] for the robot model, or any
/// harness for tests). Optional measured data adds the data-loss term.
pub fn train_pinn<F, D>(
    n: usize,
    config: &TrainConfig,
    make_fp: F,
    data: Option<&Dataset>,
) -> Result<(SurrogateModel, TrainReport)>
where
    F: FnOnce(&Scaler) -> D,
    D: ScaledDynamics,
{
    config.validate()?;
    let mut rng = StdRng::seed_from_u64(config.seed);
    let model = SurrogateModel::new(
        n,
        config.t_s,
        config.boundaries,
        config.head(),
        config.hidden_layers,
        config.neurons,
        &mut rng,
    );
    let mut fp = make_fp(&model.scaler);
    if fp.state_dim() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "scaled dynamics state",
            expected: 2 * n,
            got: fp.state_dim(),
        });
    }
    train_pinn_model(model, config, &mut fp, data, rng)
}

fn train_pinn_model<D: ScaledDynamics>(
    mut model: SurrogateModel,
    config: &TrainConfig,
    fp: &mut D,
    data: Option<&Dataset>,
    mut rng: StdRng,
) -> Result<(SurrogateModel, TrainReport)> {
    let n = model.n;
    let pinc = matches!(model.head, Head::Pinc);
    let data_cols = data.map(|ds| dataset_to_columns(ds, &model.scaler));

    let mut eta = [1.0, 1.0, 1.0];
    let mut lr = config.lr0;
    let mut adam = Adam::new(model.core.parameter_count());
    let mut params = model.core.params_flat();

    let mut train_batches = Vec::new();
    let mut val_batches = Vec::new();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut since_best = 0usize;
    let mut excluded = 0usize;
    let mut evaluated = 0usize;

    for epoch in 0..config.epochs {
        if epoch % config.resample_every == 0 {
            let set = sample_collocation(n, config.collocation_points, &mut rng);
            let (t, v) = build_batches(
                &set,
                config.ic_points,
                data_cols.as_ref().map(|(p, y)| (p, y)),
                config.batch_size,
                pinc,
                &mut rng,
            );
            train_batches = t;
            val_batches = v;
        }

        let b_train = train_batches.len().max(1) as f64;
        let mut lt = [0.0; 3];
        for (bi, batch) in train_batches.iter().enumerate() {
            let mut grad_flat = vec![0.0; params.len()];
            let mut add = |g: crate::net::mlp::Gradients| {
                for (acc, v) in grad_flat.iter_mut().zip(g.flat()) {
                    *acc += v;
                }
            };
            let mut l = [0.0; 3];
            if let Some((pts, targets)) = &batch.data {
                let (term, g) = data_loss_grad(&model, pts, targets, eta[0])?;
                l[0] = term.value;
                add(g);
            }
            if let Some(pts) = &batch.colloc {
                let (term, g) = physics_loss_grad(&model, pts, fp, eta[1])?;
                l[1] = term.value;
                excluded += term.excluded;
                evaluated += term.rows;
                add(g);
            }
            if let Some(pts) = &batch.ic {
                let (term, g) = ic_loss_grad(&model, pts, eta[2])?;
                l[2] = term.value;
                if let Some(g) = g {
                    add(g);
                }
            }
            let total = eta[0] * l[0] + eta[1] * l[1] + eta[2] * l[2];
            if !total.is_finite() {
                return Err(Error::TrainingAborted {
                    epoch,
                    batch: bi,
                    what: format!("non-finite loss {l:?}"),
                });
            }
            adam.step(&mut params, &grad_flat, lr);
            model.core.set_params_flat(&params);
            for k in 0..3 {
                lt[k] += l[k] / b_train;
            }
            if epoch == 0 && bi + 1 == train_batches.len() {
                eta = calibrate_weights(&lt, !pinc);
            }
        }

        let b_val = val_batches.len().max(1) as f64;
        let mut lv = 0.0;
        for batch in &val_batches {
            let mut l = [0.0; 3];
            if let Some((pts, targets)) = &batch.data {
                l[0] = data_loss(&model, pts, targets)?.value;
            }
            if let Some(pts) = &batch.colloc {
                let term = physics_loss(&model, pts, fp)?;
                l[1] = term.value;
            }
            if let Some(pts) = &batch.ic {
                l[2] = ic_loss(&model, pts)?.value;
            }
            lv += (eta[0] * l[0] + eta[1] * l[1] + eta[2] * l[2]) / b_val;
        }
        if !lv.is_finite() {
            return Err(Error::TrainingAborted {
                epoch,
                batch: usize::MAX,
                what: "non-finite validation loss".into(),
            });
        }

        history.push(EpochStats {
            epoch,
            l_d: lt[0],
            l_p: lt[1],
            l_0: lt[2],
            l_v: lv,
            lr,
        });

        if lv < best_val {
            best_val = lv;
            best_params.copy_from_slice(&params);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if epoch > config.plateau_patience && since_best >= config.plateau_patience {
            lr = (lr / 2.0).max(config.lr_min);
            since_best = 0;
        }
    }

    model.core.set_params_flat(&best_params);
    let excluded_fraction = if evaluated == 0 {
        0.0
    } else {
        excluded as f64 / evaluated as f64
    };
    Ok((
        model,
        TrainReport {
            history,
            best_val,
            excluded_fraction,
            excluded_flag: excluded_fraction > 0.01,
        },
    ))
}

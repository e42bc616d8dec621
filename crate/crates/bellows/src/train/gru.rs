//! Truncated-BPTT training of the GRU baseline on one-domain log data.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::net::gru::{Gru, GruGrads};
use crate::net::scaler::{Boundaries, Scaler};
use crate::net::GruModel;
use crate::train::adam::Adam;
use crate::train::pinn::{EpochStats, TrainReport};

#[derive(Debug, Clone, Copy)]
pub struct GruTrainConfig {
    pub epochs: usize,
    /// Steps per truncated-BPTT window (the batch size n_b).
    pub window: usize,
    pub hidden: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub plateau_patience: usize,
    pub boundaries: Boundaries,
    pub seed: u64,
}

impl GruTrainConfig {
    pub fn desk_default() -> Self {
        Self {
            epochs: 120,
            window: 50,
            hidden: 48,
            lr0: 3e-3,
            lr_min: 1e-4,
            plateau_patience: 10,
            boundaries: Boundaries::default(),
            seed: 0,
        }
    }
}

/// Scaled state/input columns of a dataset.
fn scale_columns(ds: &Dataset, scaler: &Scaler) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ds.dof();
    let rows = ds.len();
    let mut xs = DMatrix::zeros(2 * n, rows);
    let mut us = DMatrix::zeros(2 * n, rows);
    for k in 0..rows {
        xs.column_mut(k).copy_from(&scaler.scale_state(&ds.state(k)));
        us.column_mut(k).copy_from(&scaler.scale_input(&ds.input(k)));
    }
    (xs, us)
}

/// Recursive window pass. Feeds predictions back as inputs, accumulates the
/// per-step squared error against the measured next states, and (optionally)
/// backpropagates through the whole window.
struct WindowPass<'a> {
    gru: &'a Gru,
    xs: &'a DMatrix<f64>,
    us: &'a DMatrix<f64>,
}

impl WindowPass<'_> {
    /// Returns (loss, grads, x̂_end, h_end). `x_start` is the recursive state
    /// entering the window (detached), `h` likewise.
    fn run(
        &self,
        start: usize,
        len: usize,
        x_start: &DVector<f64>,
        h_start: &DVector<f64>,
        with_grads: bool,
    ) -> (f64, Option<GruGrads>, DVector<f64>, DVector<f64>) {
        let n2 = self.xs.nrows();
        let mut h = h_start.clone();
        let mut x_hat = x_start.clone();
        let mut caches = Vec::with_capacity(len);
        let mut outs = Vec::with_capacity(len);
        let mut loss = 0.0;
        for k in 0..len {
            let idx = start + k;
            let mut input = DVector::zeros(2 * n2);
            input.rows_mut(0, n2).copy_from(&x_hat);
            input.rows_mut(n2, n2).copy_from(&self.us.column(idx));
            let (h_new, out, cache) = self.gru.step_cached(&h, &input);
            let target = self.xs.column(idx + 1);
            loss += (&out - &target).norm_squared();
            h = h_new;
            x_hat = out.clone();
            caches.push(cache);
            outs.push(out);
        }
        let denom = (len * n2) as f64;
        loss /= denom;
        if !with_grads {
            return (loss, None, x_hat, h);
        }
        let mut grads = GruGrads::zeros_like(self.gru);
        let mut gh = DVector::zeros(h.len());
        let mut gx_feedback: DVector<f64> = DVector::zeros(n2);
        for k in (0..len).rev() {
            let idx = start + k;
            let target = self.xs.column(idx + 1);
            let mut grad_out = (&outs[k] - &target) * (2.0 / denom);
            grad_out += &gx_feedback; // prediction also feeds the next step
            let (gh_prev, gi) = self.gru.backward_step(&caches[k], &gh, &grad_out, &mut grads);
            gh = gh_prev;
            gx_feedback = gi.rows(0, n2).into_owned();
        }
        (loss, Some(grads), x_hat, h)
    }
}

/// Train on a single-domain dataset sampled at the model rate; the last 30%
/// of the log is held out for validation and best-validation weights win.
pub fn train_gru(config: &GruTrainConfig, dataset: &Dataset) -> Result<(GruModel, TrainReport)> {
    if dataset.len() < 12 {
        return Err(Error::DatasetTooShort {
            need: 12,
            got: dataset.len(),
        });
    }
    let n = dataset.dof();
    let t_s = 1.0 / dataset.rate;
    let scaler = Scaler::new(n, t_s, &config.boundaries);
    let (xs, us) = scale_columns(dataset, &scaler);
    let split = (dataset.len() as f64 * 0.7) as usize;

    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut gru = Gru::new(4 * n, config.hidden, 2 * n, &mut rng);
    let mut adam = Adam::new(gru.parameter_count());
    let mut params = gru.params_flat();
    let mut lr = config.lr0;
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut since_best = 0usize;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        // training slice, windows in order, hidden state carried (detached)
        let mut h = DVector::zeros(config.hidden);
        let mut x_hat = xs.column(0).into_owned();
        let mut train_loss = 0.0;
        let mut windows = 0usize;
        let mut start = 0usize;
        while start + 1 < split {
            let len = config.window.min(split - 1 - start);
            let pass = WindowPass { gru: &gru, xs: &xs, us: &us };
            let (loss, grads, x_end, h_end) = pass.run(start, len, &x_hat, &h, true);
            if !loss.is_finite() {
                return Err(Error::TrainingAborted {
                    epoch,
                    batch: windows,
                    what: "non-finite window loss".into(),
                });
            }
            adam.step(&mut params, &grads.unwrap().flat(), lr);
            gru.set_params_flat(&params);
            train_loss += loss;
            windows += 1;
            x_hat = x_end;
            h = h_end;
            start += len;
        }
        train_loss /= windows.max(1) as f64;

        // validation: fresh self-loop over the held-out slice
        let pass = WindowPass { gru: &gru, xs: &xs, us: &us };
        let val_len = dataset.len() - 1 - split;
        let (val_loss, _, _, _) = pass.run(
            split,
            val_len,
            &xs.column(split).into_owned(),
            &DVector::zeros(config.hidden),
            false,
        );

        history.push(EpochStats {
            epoch,
            l_d: train_loss,
            l_p: 0.0,
            l_0: 0.0,
            l_v: val_loss,
            lr,
        });
        if val_loss < best_val {
            best_val = val_loss;
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

    gru.set_params_flat(&best_params);
    Ok((
        GruModel {
            scaler,
            gru,
            t_s,
            n,
        },
        TrainReport {
            history,
            best_val,
            excluded_fraction: 0.0,
            excluded_flag: false,
        },
    ))
}

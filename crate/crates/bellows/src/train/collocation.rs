//! Collocation-point sampling in the scaled input space.
//!
//! Time, input, and domain channels use latin hypercube sampling over
//! [-1, 1]: every channel is stratified into one bin per point and the bins
//! are permuted independently. Initial-state channels instead draw from a
//! clipped normal with standard deviation 0.4, concentrating points where
//! the Coulomb term bends the dynamics hardest (velocities near zero).

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Distribution, Normal};

/// Collocation points as columns. Row layout: `[t, x0 (2n), u0 (2n), δ (2)]`,
/// all scaled.
#[derive(Debug, Clone)]
pub struct CollocationSet {
    pub points: DMatrix<f64>,
    pub n: usize,
}

impl CollocationSet {
    pub fn count(&self) -> usize {
        self.points.ncols()
    }

    pub fn channel_rows(n: usize) -> usize {
        4 * n + 3
    }
}

fn lhs_channel(n_p: usize, rng: &mut StdRng) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n_p).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|s| -1.0 + 2.0 * (s as f64 + rng.random_range(0.0..1.0)) / n_p as f64)
        .collect()
}

/// Draw `n_p` collocation points for an `n`-joint system.
pub fn sample_collocation(n: usize, n_p: usize, rng: &mut StdRng) -> CollocationSet {
    let rows = CollocationSet::channel_rows(n);
    let mut points = DMatrix::zeros(rows, n_p);
    let normal: Normal<f64> = Normal::new(0.0, 0.4).expect("valid normal");

    // t channel
    for (c, v) in lhs_channel(n_p, rng).into_iter().enumerate() {
        points[(0, c)] = v;
    }
    // x0 channels: clipped normal
    for r in 1..1 + 2 * n {
        for c in 0..n_p {
            points[(r, c)] = normal.sample(rng).clamp(-1.0, 1.0);
        }
    }
    // u and δ channels: LHS
    for r in 1 + 2 * n..rows {
        for (c, v) in lhs_channel(n_p, rng).into_iter().enumerate() {
            points[(r, c)] = v;
        }
    }
    CollocationSet { points, n }
}

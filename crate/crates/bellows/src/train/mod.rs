//! Surrogate training: collocation sampling, loss terms, the main training
//! loop for both heads, truncated-BPTT GRU training, and hyperparameter
//! search by asynchronous successive halving.

pub mod adam;
pub mod asha;
pub mod collocation;
pub mod gru;
pub mod loss;
pub mod pinn;

pub use adam::Adam;
pub use asha::{asha_optimize, check_rung_invariants, AshaConfig, TrialRecord};
pub use collocation::{sample_collocation, CollocationSet};
pub use gru::{train_gru, GruTrainConfig};
pub use loss::{
    calibrate_weights, data_loss, ic_loss, physics_loss, FpScaled, LossTerm, ScaledDynamics,
};
pub use pinn::{train_pinn, EpochStats, TrainConfig, TrainReport};

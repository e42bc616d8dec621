//! Modeling, surrogate learning, and predictive control for pneumatic
//! articulated soft robots.
//!
//! The crate covers the full pipeline against a simulated plant:
//!
//! * [`dynamics`] — first-principles chain dynamics with compliant joints,
//!   antagonistic pneumatic actuation, friction, and soft joint limits;
//! * [`integrate`] — fixed-step Euler/RK4 rollouts of the stiff state-space
//!   model, plus a fine-step oracle used as ground truth;
//! * [`ident`] — three-step least-squares identification of the joint
//!   parameters from logged data;
//! * [`net`] — from-scratch differentiable building blocks: scaler, tanh MLP
//!   with manual backprop, a damped-harmonic ansatz head with closed-form time
//!   derivative, and a GRU baseline;
//! * [`train`] — physics-informed training (with or without the ansatz head),
//!   truncated-BPTT GRU training, and an asynchronous successive-halving
//!   hyperparameter search;
//! * [`control`] — nonlinear MPC over the trained surrogate and a PI baseline
//!   with antagonistic pressure mapping;
//! * [`testbench`] — excitation protocols, a simulated plant with sensor
//!   imperfections, generalization grids, and speed benchmarks.

pub mod control;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod ident;
pub mod integrate;
pub mod model;
pub mod net;
pub mod testbench;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use model::{DhRow, RobotModel, DEG};
pub use types::{Domain, Input, State};

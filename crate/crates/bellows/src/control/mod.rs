//! Nonlinear MPC over the trained surrogate and the PI baseline.

pub mod closed_loop;
pub mod mpc;
pub mod pi;
pub mod reference;

pub use closed_loop::{closed_loop, ClosedLoopLog, Controller};
pub use mpc::{mpc_cost, mpc_solve, MpcConfig, MpcSolution, RefWindow};
pub use pi::{pi_control, PiConfig, PiState};
pub use reference::{generate_reference, Reference};

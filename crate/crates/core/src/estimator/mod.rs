//! Target-trajectory inference from measured leader motion and force.
//!
//! Two methods share the same model `u_l = −L1(x − τ) − L2(ẋ − τ̇)`:
//! [`DirectSolver`] inverts it algebraically each tick, and
//! [`TargetObserver`] runs the extended-state Kalman observer.

mod direct;
mod kalman;
mod observer;
mod target;

pub use direct::{direct_target_solve, DirectSolver};
pub use kalman::{
    build_system_matrices, extended_error_system, kalman_gain, lyapunov_energy,
    measurement_matrix, riccati_step,
};
pub use observer::{observer_update, EstimatorState, Measurement, ObserverConfig, TargetObserver};
pub use target::TargetModel;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("ill-posed target solve: L1 = {l1} must be > 0")]
    IllPosed { l1: f64 },
    #[error("singular {what}")]
    Singular { what: &'static str },
    #[error("covariance lost positive semidefiniteness (min eigenvalue {min_eigenvalue:e})")]
    LostDefiniteness { min_eigenvalue: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

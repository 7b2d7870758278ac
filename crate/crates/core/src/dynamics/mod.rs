//! Rigid-body models, fixed-step integration and contact.

mod contact;
mod linearize;
mod point_mass;
mod two_link;

pub use contact::ContactModel;
pub use linearize::{linearize_point_mass, linearize_two_link, LinearizedErrorDynamics};
pub use point_mass::{
    integrate_point_mass, kinetic_energy, rk4_step, step_point_mass, PointMassParams, RobotState,
};
pub use two_link::{
    pre_compensate, step_two_link, two_link_matrices, ArmMatrices, ArmState, LeaderModel,
    TwoLinkArmParams,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite value in `{field}`")]
    NonFinite { field: &'static str },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("singular {what} (|det| = {det:e})")]
    Singular { what: &'static str, det: f64 },
}

pub(crate) fn ensure_finite(field: &'static str, values: &[f64]) -> Result<(), DynamicsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite { field })
    }
}

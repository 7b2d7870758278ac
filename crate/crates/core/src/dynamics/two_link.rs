use nalgebra::{Matrix2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::point_mass::rk4_step;
use super::{ensure_finite, DynamicsError, PointMassParams};

/// Planar two-link arm, joint angles measured from the horizontal x axis,
/// gravity acting along −y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLinkArmParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
}

impl Default for TwoLinkArmParams {
    fn default() -> Self {
        Self {
            m1: 4.0,
            m2: 3.0,
            l1: 0.5,
            l2: 0.45,
            lc1: 0.25,
            lc2: 0.2,
            i1: 0.09,
            i2: 0.05,
            g: 9.81,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmMatrices {
    pub mass: Matrix2<f64>,
    pub coriolis: Matrix2<f64>,
    pub gravity: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    /// rad
    pub q: Vector2<f64>,
    /// rad/s
    pub qdot: Vector2<f64>,
}

/// Dynamics the compensated follower should reproduce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeaderModel {
    /// Cartesian point mass in the arm's plane; `u` is a planar force.
    PointMass(PointMassParams),
    /// Joint-space arm; `u` is a joint torque pair.
    TwoLink(TwoLinkArmParams),
}

impl TwoLinkArmParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("lc1", self.lc1),
            ("lc2", self.lc2),
            ("i1", self.i1),
            ("i2", self.i2),
        ];
        for (name, v) in fields {
            ensure_finite(name, &[v])?;
            if v <= 0.0 {
                return Err(DynamicsError::InvalidParam {
                    field: name,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        ensure_finite("g", &[self.g])
    }

    // M11 = a + 2b cos q2, M12 = c + b cos q2, M22 = c
    fn abc(&self) -> (f64, f64, f64) {
        let a = self.m1 * self.lc1 * self.lc1
            + self.m2 * (self.l1 * self.l1 + self.lc2 * self.lc2)
            + self.i1
            + self.i2;
        let b = self.m2 * self.l1 * self.lc2;
        let c = self.m2 * self.lc2 * self.lc2 + self.i2;
        (a, b, c)
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let (a, b, c) = self.abc();
        let c2 = q[1].cos();
        Matrix2::new(a + 2.0 * b * c2, c + b * c2, c + b * c2, c)
    }

    pub fn coriolis_matrix(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let h = -self.m2 * self.l1 * self.lc2 * q[1].sin();
        Matrix2::new(h * qdot[1], h * (qdot[0] + qdot[1]), -h * qdot[0], 0.0)
    }

    pub fn gravity_vector(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let c12 = (q[0] + q[1]).cos();
        let g2 = self.m2 * self.lc2 * self.g * c12;
        Vector2::new((self.m1 * self.lc1 + self.m2 * self.l1) * self.g * q[0].cos() + g2, g2)
    }

    /// Time derivative of the mass matrix along `qdot`.
    pub fn mass_matrix_dot(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let (_, b, _) = self.abc();
        let d = -b * q[1].sin() * qdot[1];
        Matrix2::new(2.0 * d, d, d, 0.0)
    }

    pub fn forward_kinematics(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let q12 = q[0] + q[1];
        Vector2::new(
            self.l1 * q[0].cos() + self.l2 * q12.cos(),
            self.l1 * q[0].sin() + self.l2 * q12.sin(),
        )
    }

    pub fn jacobian(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let q12 = q[0] + q[1];
        let (s1, c1, s12, c12) = (q[0].sin(), q[0].cos(), q12.sin(), q12.cos());
        Matrix2::new(
            -self.l1 * s1 - self.l2 * s12,
            -self.l2 * s12,
            self.l1 * c1 + self.l2 * c12,
            self.l2 * c12,
        )
    }

    /// J̇·q̇, the velocity-product part of the Cartesian acceleration.
    pub fn jacobian_dot_qdot(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Vector2<f64> {
        let q12 = q[0] + q[1];
        let w1 = qdot[0];
        let w12 = qdot[0] + qdot[1];
        Vector2::new(
            -self.l1 * q[0].cos() * w1 * w1 - self.l2 * q12.cos() * w12 * w12,
            -self.l1 * q[0].sin() * w1 * w1 - self.l2 * q12.sin() * w12 * w12,
        )
    }

    /// Cartesian end-effector position and velocity.
    pub fn cartesian(&self, state: &ArmState) -> (Vector2<f64>, Vector2<f64>) {
        (
            self.forward_kinematics(&state.q),
            self.jacobian(&state.q) * state.qdot,
        )
    }

    pub fn joint_acceleration(&self, state: &ArmState, torque: &Vector2<f64>) -> Vector2<f64> {
        let m = self.mass_matrix(&state.q);
        let rhs = torque
            - self.coriolis_matrix(&state.q, &state.qdot) * state.qdot
            - self.gravity_vector(&state.q);
        // M is positive definite for valid parameters
        m.cholesky()
            .map(|ch| ch.solve(&rhs))
            .unwrap_or_else(|| Vector2::repeat(f64::NAN))
    }
}

pub fn two_link_matrices(
    q: &Vector2<f64>,
    qdot: &Vector2<f64>,
    params: &TwoLinkArmParams,
) -> ArmMatrices {
    ArmMatrices {
        mass: params.mass_matrix(q),
        coriolis: params.coriolis_matrix(q, qdot),
        gravity: params.gravity_vector(q),
    }
}

/// RK4 step of the arm; `torque` is evaluated at every stage state.
pub fn step_two_link(
    state: &ArmState,
    params: &TwoLinkArmParams,
    torque: impl Fn(&ArmState) -> Vector2<f64>,
    dt: f64,
) -> ArmState {
    let y = Vector4::new(state.q[0], state.q[1], state.qdot[0], state.qdot[1]);
    let next = rk4_step(&y, dt, |y| {
        let s = ArmState {
            q: Vector2::new(y[0], y[1]),
            qdot: Vector2::new(y[2], y[3]),
        };
        let a = params.joint_acceleration(&s, &torque(&s));
        Vector4::new(y[2], y[3], a[0], a[1])
    });
    ArmState {
        q: Vector2::new(next[0], next[1]),
        qdot: Vector2::new(next[2], next[3]),
    }
}

const SINGULAR_TOL: f64 = 1e-9;

/// Torque that makes the arm follower behave like `leader` under input `u`.
pub fn pre_compensate(
    u: &Vector2<f64>,
    follower_state: &ArmState,
    follower: &TwoLinkArmParams,
    leader: &LeaderModel,
) -> Result<Vector2<f64>, DynamicsError> {
    ensure_finite("u", u.as_slice())?;
    ensure_finite("follower_state.q", follower_state.q.as_slice())?;
    ensure_finite("follower_state.qdot", follower_state.qdot.as_slice())?;
    follower.validate()?;
    let (q, qd) = (&follower_state.q, &follower_state.qdot);
    let f = two_link_matrices(q, qd, follower);
    let qdd = match leader {
        LeaderModel::PointMass(pm) => {
            if !(pm.mass.is_finite() && pm.mass > SINGULAR_TOL) {
                return Err(DynamicsError::Singular {
                    what: "leader inertia",
                    det: pm.mass,
                });
            }
            let j = follower.jacobian(q);
            let det = j.determinant();
            if det.abs() < SINGULAR_TOL {
                return Err(DynamicsError::Singular {
                    what: "follower jacobian",
                    det,
                });
            }
            let xd = j * qd;
            let g = Vector2::new(pm.gravity_force.x, pm.gravity_force.y);
            let a_des = (u - xd * pm.viscous_damping - g) / pm.mass;
            j.lu()
                .solve(&(a_des - follower.jacobian_dot_qdot(q, qd)))
                .ok_or(DynamicsError::Singular {
                    what: "follower jacobian",
                    det,
                })?
        }
        LeaderModel::TwoLink(lp) => {
            lp.validate()?;
            let l = two_link_matrices(q, qd, lp);
            let det = l.mass.determinant();
            if det.abs() < SINGULAR_TOL {
                return Err(DynamicsError::Singular {
                    what: "leader inertia",
                    det,
                });
            }
            l.mass
                .lu()
                .solve(&(u - l.coriolis * qd - l.gravity))
                .ok_or(DynamicsError::Singular {
                    what: "leader inertia",
                    det,
                })?
        }
    };
    Ok(f.mass * qdd + f.coriolis * qd + f.gravity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Axes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn potential(p: &TwoLinkArmParams, q: &Vector2<f64>) -> f64 {
        // heights of the two centers of mass
        let y1 = p.lc1 * q[0].sin();
        let y2 = p.l1 * q[0].sin() + p.lc2 * (q[0] + q[1]).sin();
        p.g * (p.m1 * y1 + p.m2 * y2)
    }

    fn kinetic(p: &TwoLinkArmParams, q: &Vector2<f64>, qd: &Vector2<f64>) -> f64 {
        // direct sum over bodies from center-of-mass velocities
        let q12 = q[0] + q[1];
        let v1 = Vector2::new(-p.lc1 * q[0].sin(), p.lc1 * q[0].cos()) * qd[0];
        let v2 = Vector2::new(-p.l1 * q[0].sin(), p.l1 * q[0].cos()) * qd[0]
            + Vector2::new(-p.lc2 * q12.sin(), p.lc2 * q12.cos()) * (qd[0] + qd[1]);
        0.5 * p.m1 * v1.norm_squared()
            + 0.5 * p.i1 * qd[0] * qd[0]
            + 0.5 * p.m2 * v2.norm_squared()
            + 0.5 * p.i2 * (qd[0] + qd[1]).powi(2)
    }

    #[test]
    fn no_velocity_no_coriolis() {
        let m = two_link_matrices(&Vector2::zeros(), &Vector2::zeros(), &Default::default());
        assert_eq!(m.coriolis, Matrix2::zeros());
    }

    #[test]
    fn gravity_matches_potential_gradient() {
        let p = TwoLinkArmParams::default();
        for q in [Vector2::new(FRAC_PI_2, 0.0), Vector2::new(0.3, -1.1), Vector2::new(-2.0, 2.5)] {
            let g = p.gravity_vector(&q);
            let h = 1e-6;
            for i in 0..2 {
                let mut qp = q;
                let mut qm = q;
                qp[i] += h;
                qm[i] -= h;
                let fd = (potential(&p, &qp) - potential(&p, &qm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "axis {i}: {fd} vs {}", g[i]);
            }
        }
        // straight up: no torque from gravity
        let g = p.gravity_vector(&Vector2::new(FRAC_PI_2, 0.0));
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn mass_matrix_matches_kinetic_energy() {
        let p = TwoLinkArmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let qd = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let t = 0.5 * (qd.transpose() * p.mass_matrix(&q) * qd)[0];
            assert!((t - kinetic(&p, &q, &qd)).abs() < 1e-12);
        }
    }

    #[test]
    fn structure_at_random_states() {
        let p = TwoLinkArmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = Vector2::new(rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2));
            let qd = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let m = p.mass_matrix(&q);
            assert_eq!(m, m.transpose());
            assert!(m.cholesky().is_some());
            let n = p.mass_matrix_dot(&q, &qd) - p.coriolis_matrix(&q, &qd) * 2.0;
            let x = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            assert!((x.transpose() * n * x)[0].abs() < 1e-12);
        }
    }

    #[test]
    fn mass_matrix_dot_matches_finite_difference() {
        let p = TwoLinkArmParams::default();
        let q = Vector2::new(0.4, 0.9);
        let qd = Vector2::new(-0.7, 1.3);
        let h = 1e-6;
        let fd = (p.mass_matrix(&(q + qd * h)) - p.mass_matrix(&(q - qd * h))) / (2.0 * h);
        assert!((fd - p.mass_matrix_dot(&q, &qd)).norm() < 1e-8);
    }

    #[test]
    fn gravity_holding_torque() {
        let p = TwoLinkArmParams::default();
        let s = ArmState {
            q: Vector2::new(0.3, 0.8),
            qdot: Vector2::zeros(),
        };
        let tau = pre_compensate(
            &Vector2::zeros(),
            &s,
            &p,
            &LeaderModel::PointMass(PointMassParams::new(12.8, 5.0)),
        )
        .unwrap();
        assert!((tau - p.gravity_vector(&s.q)).norm() < 1e-12);
    }

    #[test]
    fn identical_leader_passes_input_through() {
        let p = TwoLinkArmParams::default();
        let s = ArmState {
            q: Vector2::new(0.3, 0.8),
            qdot: Vector2::new(0.2, -0.4),
        };
        let u = Vector2::new(1.5, -0.3);
        let tau = pre_compensate(&u, &s, &p, &LeaderModel::TwoLink(p)).unwrap();
        assert!((tau - u).norm() < 1e-12);
    }

    #[test]
    fn singularities_rejected() {
        let p = TwoLinkArmParams::default();
        let s = ArmState {
            q: Vector2::new(0.3, 0.8),
            qdot: Vector2::zeros(),
        };
        let massless = PointMassParams {
            mass: 0.0,
            viscous_damping: 1.0,
            gravity_force: Axes::zeros(),
        };
        let e = pre_compensate(&Vector2::zeros(), &s, &p, &LeaderModel::PointMass(massless));
        assert!(matches!(e, Err(DynamicsError::Singular { what: "leader inertia", .. })));
        let stretched = ArmState {
            q: Vector2::new(0.3, 0.0),
            qdot: Vector2::zeros(),
        };
        let e = pre_compensate(
            &Vector2::zeros(),
            &stretched,
            &p,
            &LeaderModel::PointMass(PointMassParams::default()),
        );
        assert!(matches!(e, Err(DynamicsError::Singular { what: "follower jacobian", .. })));
    }
}

//! Control laws: the simulated operator, the high-gain baseline, and the
//! delayed TIC/IAC spring–damper laws.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::RobotState;
use crate::transport::{LeaderPacket, PayloadKind};
use crate::Axes;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceGains {
    /// N/m
    pub l1: Axes,
    /// N·s/m
    pub l2: Axes,
}

impl ImpedanceGains {
    pub fn new(l1: Axes, l2: Axes) -> Self {
        Self { l1, l2 }
    }

    /// L2 = 0.1·L1
    pub fn coupled(l1: Axes) -> Self {
        Self { l1, l2: l1 * crate::impedance::DEFAULT_COUPLING }
    }

    pub fn isotropic(l1: f64, l2: f64) -> Self {
        Self { l1: Axes::repeat(l1), l2: Axes::repeat(l2) }
    }

    pub fn is_valid(&self) -> bool {
        self.l1.iter().chain(self.l2.iter()).all(|v| v.is_finite() && *v > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSource {
    Tic,
    Iac,
    HighGain,
    Operator,
    /// Startup hold before the first packet arrives.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub u: Axes,
    pub source: ControlSource,
    pub gains: ImpedanceGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sine {
    /// m
    pub amplitude: f64,
    pub freq_hz: f64,
    /// rad
    pub phase: f64,
}

impl Sine {
    fn eval(&self, t: f64) -> (f64, f64) {
        let w = 2.0 * PI * self.freq_hz;
        let a = w * t + self.phase;
        (self.amplitude * a.sin(), self.amplitude * w * a.cos())
    }
}

/// Operator target on one axis: a minimum-jerk path through waypoints plus
/// sinusoids, the latter active only inside `sine_window` when given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisTrajectory {
    /// (t, position) pairs, times increasing
    pub waypoints: Vec<[f64; 2]>,
    pub sines: Vec<Sine>,
    pub sine_window: Option<[f64; 2]>,
}

impl AxisTrajectory {
    pub fn constant(value: f64) -> Self {
        Self { waypoints: vec![[0.0, value]], ..Default::default() }
    }

    pub fn sines(offset: f64, sines: Vec<Sine>) -> Self {
        Self { waypoints: vec![[0.0, offset]], sines, sine_window: None }
    }

    /// (position, velocity) at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (mut p, mut v) = min_jerk_path(&self.waypoints, t);
        let active = self.sine_window.map_or(true, |[a, b]| t >= a && t < b);
        if active {
            for s in &self.sines {
                let (sp, sv) = s.eval(t);
                p += sp;
                v += sv;
            }
        }
        (p, v)
    }
}

fn min_jerk_path(points: &[[f64; 2]], t: f64) -> (f64, f64) {
    match points {
        [] => (0.0, 0.0),
        [only] => (only[1], 0.0),
        _ => {
            if t <= points[0][0] {
                return (points[0][1], 0.0);
            }
            for w in points.windows(2) {
                let ([t0, p0], [t1, p1]) = (w[0], w[1]);
                if t < t1 {
                    let dur = t1 - t0;
                    let s = (t - t0) / dur;
                    let shape = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                    let rate = 30.0 * s * s * (1.0 - s) * (1.0 - s) / dur;
                    return (p0 + (p1 - p0) * shape, (p1 - p0) * rate);
                }
            }
            (points[points.len() - 1][1], 0.0)
        }
    }
}

/// Simulated human arm holding the leader handle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorModel {
    pub trajectory: [AxisTrajectory; 3],
    /// N/m
    pub l_l1: f64,
    /// N·s/m
    pub l_l2: f64,
}

impl Default for OperatorModel {
    fn default() -> Self {
        Self {
            trajectory: Default::default(),
            l_l1: 400.0,
            l_l2: 40.0,
        }
    }
}

impl OperatorModel {
    pub fn target(&self, t: f64) -> (Axes, Axes) {
        let mut p = Axes::zeros();
        let mut v = Axes::zeros();
        for i in 0..3 {
            let (a, b) = self.trajectory[i].eval(t);
            p[i] = a;
            v[i] = b;
        }
        (p, v)
    }

    pub fn is_valid(&self) -> bool {
        self.l_l1 > 0.0 && self.l_l2 > 0.0 && self.l_l1.is_finite() && self.l_l2.is_finite()
    }
}

/// Sinusoid for the operator's target such that a point-mass leader in
/// closed loop with the arm follows `amplitude·sin(2π f t)` exactly in steady
/// state.
pub fn compensated_sine(amplitude: f64, freq_hz: f64, mass: f64, damping: f64, l_l1: f64, l_l2: f64) -> Sine {
    let w = 2.0 * PI * freq_hz;
    // (M s² + (C + L2) s + L1) / (L2 s + L1) at s = jω
    let (nr, ni) = (l_l1 - mass * w * w, (damping + l_l2) * w);
    let (dr, di) = (l_l1, l_l2 * w);
    let den = dr * dr + di * di;
    let (gr, gi) = ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den);
    Sine {
        amplitude: amplitude * gr.hypot(gi),
        freq_hz,
        phase: gi.atan2(gr),
    }
}

/// `u_l = −L_l1(x − τ_l) − L_l2(ẋ − τ̇_l)`
pub fn operator_control(model: &OperatorModel, leader: &RobotState, t: f64) -> Axes {
    let (p, v) = model.target(t);
    operator_force(model, leader, &p, &v)
}

/// Operator law against an explicit target.
pub fn operator_force(model: &OperatorModel, leader: &RobotState, target: &Axes, target_vel: &Axes) -> Axes {
    -(leader.position - target) * model.l_l1 - (leader.velocity - target_vel) * model.l_l2
}

/// `−L1(x − p) − L2(ẋ − v)` per axis.
pub fn spring_damper(state: &RobotState, position: &Axes, velocity: &Axes, gains: &ImpedanceGains) -> Axes {
    -(state.position - position).component_mul(&gains.l1) - (state.velocity - velocity).component_mul(&gains.l2)
}

/// `u = G − L1(x − x_l) − L2(ẋ − ẋ_l)`
pub fn high_gain_control(
    x: &Axes,
    xdot: &Axes,
    x_l: &Axes,
    xdot_l: &Axes,
    gravity: &Axes,
    gains: &ImpedanceGains,
) -> Axes {
    gravity + spring_damper(&RobotState::new(*x, *xdot), x_l, xdot_l, gains)
}

fn packet_gains(p: &LeaderPacket) -> ImpedanceGains {
    ImpedanceGains { l1: p.l1, l2: p.l2 }
}

/// Delayed TIC: pull toward the δ-old measured leader state with δ-old gains.
pub fn tic_control(follower: &RobotState, delayed: &LeaderPacket) -> ControlCommand {
    let gains = packet_gains(delayed);
    ControlCommand {
        u: spring_damper(follower, &delayed.position, &delayed.velocity, &gains),
        source: ControlSource::Tic,
        gains,
    }
}

/// Delayed IAC: pull toward the δ-old estimated target with δ-old gains.
pub fn iac_control(follower: &RobotState, delayed_target: &LeaderPacket) -> ControlCommand {
    let gains = packet_gains(delayed_target);
    ControlCommand {
        u: spring_damper(follower, &delayed_target.position, &delayed_target.velocity, &gains),
        source: ControlSource::Iac,
        gains,
    }
}

/// Dispatch on the packet's payload kind.
pub fn packet_control(follower: &RobotState, packet: &LeaderPacket) -> ControlCommand {
    match packet.kind {
        PayloadKind::RawState => tic_control(follower, packet),
        PayloadKind::Target => iac_control(follower, packet),
    }
}

/// Hold `anchor` at rest before any packet has arrived.
pub fn hold_control(follower: &RobotState, anchor: &Axes, gains: &ImpedanceGains) -> ControlCommand {
    ControlCommand {
        u: spring_damper(follower, anchor, &Axes::zeros(), gains),
        source: ControlSource::Hold,
        gains: *gains,
    }
}

/// Force rendered on the leader handle: equal and opposite to the contact.
pub fn bilateral_feedback(f_env: &Axes) -> Axes {
    -f_env
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step_point_mass, PointMassParams};
    use proptest::prelude::*;

    fn packet(kind: PayloadKind, p: Axes, v: Axes, g: ImpedanceGains) -> LeaderPacket {
        LeaderPacket { seq: 0, t_send: 0.0, kind, position: p, velocity: v, l1: g.l1, l2: g.l2 }
    }

    #[test]
    fn operator_examples() {
        let m = OperatorModel {
            trajectory: [AxisTrajectory::constant(0.1), AxisTrajectory::constant(0.0), AxisTrajectory::constant(0.0)],
            l_l1: 500.0,
            l_l2: 50.0,
        };
        let on = RobotState::at_rest(Axes::new(0.1, 0.0, 0.0));
        assert_eq!(operator_control(&m, &on, 1.0), Axes::zeros());
        let off = RobotState::at_rest(Axes::new(0.12, 0.0, 0.0));
        assert!((operator_control(&m, &off, 1.0).x + 10.0).abs() < 1e-12);
    }

    fn leader_lag(l_l1: f64) -> f64 {
        let p = PointMassParams::default();
        let tr = AxisTrajectory::sines(0.0, vec![Sine { amplitude: 0.1, freq_hz: 0.6, phase: 0.0 }]);
        let m = OperatorModel { trajectory: [tr, Default::default(), Default::default()], l_l1, l_l2: 0.1 * l_l1 };
        let mut s = RobotState::default();
        let mut worst = 0.0f64;
        for k in 0..10_000 {
            let t = k as f64 * 1e-3;
            let u = operator_control(&m, &s, t);
            if t > 5.0 {
                worst = worst.max((s.position.x - m.target(t).0.x).abs());
            }
            s = step_point_mass(&s, &p, &u, &Axes::zeros(), 1e-3).unwrap();
        }
        worst
    }

    #[test]
    fn lag_shrinks_with_arm_stiffness() {
        let (soft, stiff) = (leader_lag(200.0), leader_lag(1000.0));
        assert!(soft < 0.2 && stiff < soft, "{soft} {stiff}");
    }

    #[test]
    fn compensated_sine_is_exact() {
        let (m, c) = (12.8, 5.0);
        let s = compensated_sine(0.1, 0.6, m, c, 400.0, 40.0);
        let op = OperatorModel {
            trajectory: [AxisTrajectory::sines(0.0, vec![s]), Default::default(), Default::default()],
            ..Default::default()
        };
        let w = 2.0 * PI * 0.6;
        let p = PointMassParams::new(m, c);
        let mut st = RobotState::new(Axes::zeros(), Axes::new(0.1 * w, 0.0, 0.0));
        let mut worst = 0.0f64;
        for k in 0..5000 {
            let t = k as f64 * 1e-3;
            worst = worst.max((st.position.x - 0.1 * (w * t).sin()).abs());
            let u = operator_control(&op, &st, t);
            st = step_point_mass(&st, &p, &u, &Axes::zeros(), 1e-3).unwrap();
        }
        // zero-order hold of the force leaves a sub-millimetre residue
        assert!(worst < 5e-4, "{worst}");
    }

    #[test]
    fn min_jerk_endpoints() {
        let tr = AxisTrajectory { waypoints: vec![[1.0, 0.0], [3.0, 0.2]], ..Default::default() };
        assert_eq!(tr.eval(0.0), (0.0, 0.0));
        assert_eq!(tr.eval(5.0), (0.2, 0.0));
        let (p, v) = tr.eval(2.0);
        assert!((p - 0.1).abs() < 1e-12);
        assert!((v - 0.2 * 1.875 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn high_gain_examples() {
        let g = ImpedanceGains::isotropic(500.0, 50.0);
        let x = Axes::new(0.1, 0.2, 0.3);
        let z = Axes::zeros();
        assert_eq!(high_gain_control(&x, &z, &x, &z, &z, &g), z);
        // constant x_l, C = 0: converges
        let p = PointMassParams::new(12.8, 0.0);
        let target = Axes::new(0.05, -0.02, 0.1);
        let mut s = RobotState::default();
        for _ in 0..20_000 {
            let u = high_gain_control(&s.position, &s.velocity, &target, &z, &z, &g);
            s = step_point_mass(&s, &p, &u, &z, 1e-3).unwrap();
        }
        assert!((s.position - target).amax() < 1e-6);
    }

    fn sine_tracking_error(l1: f64) -> f64 {
        let p = PointMassParams::new(12.8, 5.0);
        let g = ImpedanceGains::isotropic(l1, 0.1 * l1);
        let w = 2.0 * PI * 0.6;
        let z = Axes::zeros();
        let mut s = RobotState::default();
        let mut worst = 0.0f64;
        for k in 0..10_000 {
            let t = k as f64 * 1e-3;
            let xl = Axes::new(0.1 * (w * t).sin(), 0.0, 0.0);
            let vl = Axes::new(0.1 * w * (w * t).cos(), 0.0, 0.0);
            if t > 5.0 {
                worst = worst.max((s.position - xl).norm());
            }
            let u = high_gain_control(&s.position, &s.velocity, &xl, &vl, &z, &g);
            s = step_point_mass(&s, &p, &u, &z, 1e-3).unwrap();
        }
        worst
    }

    #[test]
    fn uncompensated_dynamics_leave_error() {
        let (lo, hi) = (sine_tracking_error(200.0), sine_tracking_error(2000.0));
        assert!(lo > 1e-3 && hi > 1e-4 && hi < lo, "{lo} {hi}");
    }

    #[test]
    fn on_packet_state_gives_zero() {
        let g = ImpedanceGains::isotropic(300.0, 30.0);
        let s = RobotState::new(Axes::new(0.1, 0.0, 0.2), Axes::new(0.0, 0.3, 0.0));
        let pk = packet(PayloadKind::RawState, s.position, s.velocity, g);
        assert_eq!(tic_control(&s, &pk).u, Axes::zeros());
    }

    #[test]
    fn feedback_sign() {
        assert_eq!(bilateral_feedback(&Axes::zeros()), Axes::zeros());
        assert_eq!(bilateral_feedback(&Axes::new(0.0, 0.0, 10.0)).z, -10.0);
    }

    #[test]
    fn stored_plus_dissipated_energy_balances_work() {
        // constant gains, stationary target: work by external push = ΔE + dissipation
        let p = PointMassParams::new(2.0, 0.0);
        let g = ImpedanceGains::isotropic(400.0, 20.0);
        let target = Axes::zeros();
        let dt = 1e-4;
        let mut s = RobotState::default();
        let (mut injected, mut dissipated) = (0.0, 0.0);
        let energy = |s: &RobotState| 0.5 * p.mass * s.velocity.norm_squared() + 0.5 * 400.0 * s.position.norm_squared();
        let e0 = energy(&s);
        for k in 0..20_000 {
            let push = Axes::new(if k < 5000 { 3.0 } else { 0.0 }, 0.0, 0.0);
            let next = crate::dynamics::integrate_point_mass(
                &s,
                &p,
                |st| push + spring_damper(st, &target, &Axes::zeros(), &g),
                dt,
            );
            let vmid = (s.velocity + next.velocity) * 0.5;
            injected += push.dot(&vmid) * dt;
            dissipated += 20.0 * vmid.norm_squared() * dt;
            s = next;
        }
        let residual = injected - (energy(&s) - e0) - dissipated;
        assert!(residual.abs() < 1e-3 * injected.abs(), "{residual} of {injected}");
    }

    proptest! {
        #[test]
        fn iac_degenerates_to_tic(
            x in prop::array::uniform3(-1.0f64..1.0), v in prop::array::uniform3(-1.0f64..1.0),
            xl in prop::array::uniform3(-1.0f64..1.0), vl in prop::array::uniform3(-1.0f64..1.0),
            l1 in prop::array::uniform3(1.0f64..2000.0), l2 in prop::array::uniform3(0.1f64..200.0),
        ) {
            let s = RobotState::new(Axes::from(x), Axes::from(v));
            let g = ImpedanceGains::new(Axes::from(l1), Axes::from(l2));
            let a = tic_control(&s, &packet(PayloadKind::RawState, Axes::from(xl), Axes::from(vl), g));
            let b = iac_control(&s, &packet(PayloadKind::Target, Axes::from(xl), Axes::from(vl), g));
            prop_assert_eq!(a.u.as_slice().iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
                            b.u.as_slice().iter().map(|f| f.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(a.gains, g);
            prop_assert_eq!(b.gains, g);
        }
    }
}

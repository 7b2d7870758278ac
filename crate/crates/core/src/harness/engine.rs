use log::warn;
use thiserror::Error;

use super::config::{ConfigError, ControllerKind, EstimatorKind, ScenarioConfig};
use super::trace::{ScenarioTrace, TraceRow};
use crate::controllers::{
    bilateral_feedback, high_gain_control, hold_control, operator_force, packet_control, ControlCommand,
    ControlSource, ImpedanceGains, OperatorModel,
};
use crate::dynamics::{integrate_point_mass, ContactModel, RobotState};
use crate::estimator::{DirectSolver, EstimatorError, Measurement, TargetObserver};
use crate::impedance::{grasp_to_stiffness, shape_stiffness, RateLimiterState};
use crate::transport::{DelayLine, EnqueueError, InProcess, LeaderPacket, Packet, PayloadKind, Wire, WireError};
use crate::Axes;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("divergence at t = {t:.3} s: {what}")]
    Diverged { t: f64, what: String },
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("transport: {0}")]
    Wire(#[from] WireError),
    #[error("delay line: {0}")]
    Enqueue(#[from] EnqueueError),
}

/// Everything produced by one tick; `row` is what the trace keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub row: TraceRow,
    pub command: ControlCommand,
    /// Follower state the command was computed from.
    pub follower: RobotState,
    /// Packet sent by the leader this tick.
    pub sent: LeaderPacket,
    /// Force rendered on the leader handle (bilateral mode).
    pub feedback: Axes,
    /// Force on the estimator's force channel.
    pub measured_force: Axes,
    /// Sequence number (= send tick) of the packet in use, if any.
    pub applied_seq: Option<u32>,
    /// True when a new packet was taken from the delay line this tick.
    pub fresh_packet: bool,
    pub ruptured: bool,
}

enum Estimators {
    Direct([DirectSolver; 3]),
    Observer(Box<[TargetObserver; 3]>),
}

pub struct Engine {
    cfg: ScenarioConfig,
    operator: OperatorModel,
    controller: ControllerKind,
    tick: u64,
    leader: RobotState,
    follower: RobotState,
    limiter: RateLimiterState,
    estimators: Estimators,
    line: DelayLine<LeaderPacket>,
    wire: Box<dyn Wire + Send>,
    applied: Option<LeaderPacket>,
    anchor: Axes,
    hold_gains: Option<ImpedanceGains>,
    contact: ContactModel,
    leader_contact: ContactModel,
    target_override: Option<Axes>,
    grasp_override: Option<f64>,
}

impl Engine {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, EngineError> {
        Self::with_wire(cfg, Box::new(InProcess))
    }

    pub fn with_wire(cfg: ScenarioConfig, wire: Box<dyn Wire + Send>) -> Result<Self, EngineError> {
        cfg.validate()?;
        let operator = cfg.resolved_operator();
        let leader = cfg.leader_initial.unwrap_or_else(|| {
            let (p, v) = operator.target(0.0);
            RobotState::new(p, v)
        });
        let follower = cfg.follower_initial.unwrap_or(leader);
        let l1_0 = cfg.stiffness.at(0.0);
        let limiter = RateLimiterState::with_coupling(Axes::repeat(l1_0), cfg.leader.mass, cfg.coupling, cfg.rate_margin);
        let estimators = match cfg.estimator {
            EstimatorKind::Direct => Estimators::Direct(std::array::from_fn(|_| DirectSolver::new(cfg.direct_rate_cutoff_hz))),
            EstimatorKind::Observer => {
                Estimators::Observer(Box::new(std::array::from_fn(|_| TargetObserver::new(cfg.observer.clone()))))
            }
        };
        let line = DelayLine::new(cfg.delta)?;
        Ok(Self {
            controller: cfg.controller,
            contact: cfg.contact,
            leader_contact: cfg.leader_contact,
            operator,
            tick: 0,
            anchor: follower.position,
            leader,
            follower,
            limiter,
            estimators,
            line,
            wire,
            applied: None,
            hold_gains: None,
            target_override: None,
            grasp_override: None,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn leader(&self) -> &RobotState {
        &self.leader
    }

    pub fn follower(&self) -> &RobotState {
        &self.follower
    }

    pub fn controller(&self) -> ControllerKind {
        self.controller
    }

    pub fn contact(&self) -> &ContactModel {
        &self.contact
    }

    pub fn gains(&self) -> ImpedanceGains {
        ImpedanceGains::new(self.limiter.l1, self.limiter.l2)
    }

    pub fn delta(&self) -> f64 {
        self.line.delta()
    }

    pub fn set_controller(&mut self, kind: ControllerKind) {
        self.controller = kind;
    }

    /// Replace the scripted operator target with a fixed point (interactive).
    pub fn set_target_override(&mut self, target: Option<Axes>) {
        self.target_override = target;
    }

    /// Drive stiffness from a grasp level instead of the schedule.
    pub fn set_grasp_override(&mut self, grasp: Option<f64>) {
        self.grasp_override = grasp;
    }

    pub fn set_delay(&mut self, delta: f64) -> Result<(), EngineError> {
        if self.cfg.bilateral && delta != 0.0 {
            return Err(ConfigError::single("delta", "bilateral mode requires zero delay").into());
        }
        self.line.set_delta(delta)?;
        Ok(())
    }

    fn desired_stiffness(&self, t: f64) -> f64 {
        match self.grasp_override {
            Some(g) => grasp_to_stiffness(g.max(0.0), &self.cfg.grasp_map).unwrap_or(self.cfg.grasp_map.k_min),
            None => self.cfg.stiffness.at(t),
        }
    }

    fn estimate(&mut self, meas: [Measurement; 3], gains: &ImpedanceGains, extra: &Axes, t: f64) -> Result<(Axes, Axes), EstimatorError> {
        let dt = self.cfg.dt;
        let (mass, damping) = (self.cfg.leader.mass, self.cfg.leader.viscous_damping);
        let mut tau = Axes::zeros();
        let mut tau_dot = Axes::zeros();
        for i in 0..3 {
            let m = meas[i];
            let (p, v) = match &mut self.estimators {
                Estimators::Direct(s) => {
                    let z = m.z();
                    s[i].update(z[0], z[1], z[2], gains.l1[i], gains.l2[i], dt)?
                }
                Estimators::Observer(o) => o[i].update(&m, gains.l1[i], gains.l2[i], mass, damping, extra[i], t, dt)?,
            };
            tau[i] = p;
            tau_dot[i] = v;
        }
        Ok((tau, tau_dot))
    }

    pub fn step(&mut self) -> Result<TickRecord, EngineError> {
        let t = self.time();
        let dt = self.cfg.dt;

        // commanded impedance
        let desired = Axes::repeat(self.desired_stiffness(t));
        if self.cfg.rate_limit {
            let (_, _, next) = shape_stiffness(&desired, &self.limiter, dt);
            self.limiter = next;
        } else {
            self.limiter = RateLimiterState::with_coupling(desired, self.cfg.leader.mass, self.cfg.coupling, self.cfg.rate_margin);
        }
        let gains = self.gains();
        let hold_gains = *self.hold_gains.get_or_insert(gains);

        // operator and environment
        let (target, target_vel) = match self.target_override {
            Some(p) => (p, Axes::zeros()),
            None => self.operator.target(t),
        };
        let u_h = operator_force(&self.operator, &self.leader, &target, &target_vel);
        let f_env = self.contact.contact_force(&self.follower.position, &self.follower.velocity);
        let f_leader_env = self.leader_contact.force(&self.leader.position, &self.leader.velocity);
        let (feedback, u_t) = if self.cfg.bilateral {
            // the operator holds against the rendered force
            (bilateral_feedback(&f_env), u_h + f_env)
        } else {
            (Axes::zeros(), u_h)
        };
        let meas: [Measurement; 3] = std::array::from_fn(|i| {
            if self.cfg.bilateral && self.cfg.env_correction {
                Measurement::bilateral(self.leader.position[i], self.leader.velocity[i], u_t[i], f_env[i])
            } else {
                Measurement::free(self.leader.position[i], self.leader.velocity[i], u_t[i])
            }
        });
        let measured_force = Axes::from_fn(|i, _| meas[i].z()[2]);
        let (tau, tau_dot) = self.estimate(meas, &gains, &f_leader_env, t)?;

        // leader → follower
        let (kind, pos, vel) = match self.controller {
            ControllerKind::Iac => (PayloadKind::Target, tau, tau_dot),
            _ => (PayloadKind::RawState, self.leader.position, self.leader.velocity),
        };
        let packet = LeaderPacket {
            seq: self.tick as u32,
            t_send: t,
            kind,
            position: pos,
            velocity: vel,
            l1: gains.l1,
            l2: gains.l2,
        };
        let sent = packet;
        let packet = match self.wire.transmit(Packet::Leader(packet))? {
            Packet::Leader(p) => p,
            Packet::Feedback(_) => unreachable!("wire returned a different packet type"),
        };
        self.line.enqueue(packet, t)?;
        let fresh = self.line.poll_latest(t);
        if fresh.is_some() {
            self.applied = fresh;
        }

        let command = match &self.applied {
            None => hold_control(&self.follower, &self.anchor, &hold_gains),
            Some(p) if self.controller == ControllerKind::HighGain && p.kind == PayloadKind::RawState => {
                let g = ImpedanceGains::new(p.l1, p.l2);
                ControlCommand {
                    u: high_gain_control(
                        &self.follower.position,
                        &self.follower.velocity,
                        &p.position,
                        &p.velocity,
                        &self.cfg.follower.gravity_force,
                        &g,
                    ),
                    source: ControlSource::HighGain,
                    gains: g,
                }
            }
            Some(p) => packet_control(&self.follower, p),
        };

        let row = TraceRow {
            t,
            x_l: self.leader.position,
            xdot_l: self.leader.velocity,
            x: self.follower.position,
            tau,
            l1: gains.l1,
            l2: gains.l2,
            u_l: u_h,
            u: command.u,
            f_env,
            error: (self.follower.position - self.leader.position).norm(),
        };

        let follower_before = self.follower;

        // integrate, contact evaluated at every stage
        let leader_push = u_t + feedback;
        let lc = self.leader_contact;
        self.leader = integrate_point_mass(&self.leader, &self.cfg.leader, |s| leader_push + lc.force(&s.position, &s.velocity), dt);
        let fc = self.contact;
        let u = command.u;
        self.follower = integrate_point_mass(&self.follower, &self.cfg.follower, |s| u + fc.force(&s.position, &s.velocity), dt);
        self.tick += 1;

        let bound = self.cfg.divergence_bound;
        for (name, s) in [("leader", &self.leader), ("follower", &self.follower)] {
            if !s.is_finite() || s.position.amax() > bound {
                warn!("{name} diverged at t = {t}");
                return Err(EngineError::Diverged { t, what: format!("{name} position {:?}", s.position.as_slice()) });
            }
        }

        Ok(TickRecord {
            tick: self.tick - 1,
            row,
            command,
            follower: follower_before,
            sent,
            feedback,
            measured_force,
            applied_seq: self.applied.map(|p| p.seq),
            fresh_packet: fresh.is_some(),
            ruptured: self.contact.is_ruptured(),
        })
    }
}

/// Run a scenario to completion; the trace has `duration/dt + 1` rows.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioTrace, EngineError> {
    run_scenario_with_wire(cfg, Box::new(InProcess))
}

pub fn run_scenario_with_wire(cfg: &ScenarioConfig, wire: Box<dyn Wire + Send>) -> Result<ScenarioTrace, EngineError> {
    let mut engine = Engine::with_wire(cfg.clone(), wire)?;
    let n = cfg.ticks();
    let mut rows = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        rows.push(engine.step()?.row);
    }
    Ok(ScenarioTrace { dt: cfg.dt, rows })
}

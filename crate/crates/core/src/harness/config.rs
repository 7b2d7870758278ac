use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{compensated_sine, AxisTrajectory, OperatorModel, Sine};
use crate::dynamics::{ContactModel, PointMassParams, RobotState};
use crate::estimator::ObserverConfig;
use crate::impedance::{GraspMap, GraspProfile, StiffnessSchedule};
use crate::Axes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Fig2,
    FreeTracking,
    Balloon,
    BilateralPolish,
    Custom,
}

impl std::str::FromStr for ScenarioId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| format!("unknown scenario `{s}`"))
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit enum serializes");
        write!(f, "{}", v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Tic,
    Iac,
    #[serde(alias = "high-gain")]
    HighGain,
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown controller `{s}` (tic | iac | high-gain)"))
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Tic => "tic",
            ControllerKind::Iac => "iac",
            ControllerKind::HighGain => "high_gain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Per-tick algebraic solve.
    Direct,
    /// Extended-state Kalman observer.
    Observer,
}

/// Seeded sum-of-sinusoids operator path, one set per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededOperator {
    /// m, one sinusoid per entry
    pub amplitudes: Vec<f64>,
    /// s
    pub period_range: [f64; 2],
    /// m, per axis
    pub offset: [f64; 3],
}

impl SeededOperator {
    pub fn trajectories(&self, seed: u64) -> [AxisTrajectory; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: [AxisTrajectory; 3] = Default::default();
        for (axis, tr) in out.iter_mut().enumerate() {
            let sines = self
                .amplitudes
                .iter()
                .map(|&amplitude| {
                    let period = rng.gen_range(self.period_range[0]..self.period_range[1]);
                    Sine { amplitude, freq_hz: 1.0 / period, phase: rng.gen_range(0.0..2.0 * PI) }
                })
                .collect();
            *tr = AxisTrajectory::sines(self.offset[axis], sines);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub controller: ControllerKind,
    pub estimator: EstimatorKind,
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
    /// s, leader→follower delay
    pub delta: f64,
    pub seed: u64,
    pub leader: PointMassParams,
    pub follower: PointMassParams,
    pub operator: OperatorModel,
    /// Replaces `operator.trajectory` when present.
    pub seeded_operator: Option<SeededOperator>,
    /// Defaults to the operator's target at t = 0.
    pub leader_initial: Option<RobotState>,
    /// Defaults to the leader's initial state.
    pub follower_initial: Option<RobotState>,
    pub stiffness: StiffnessSchedule,
    pub grasp_map: GraspMap,
    pub rate_limit: bool,
    pub coupling: f64,
    pub rate_margin: f64,
    /// Follower environment.
    pub contact: ContactModel,
    /// Leader environment.
    pub leader_contact: ContactModel,
    pub bilateral: bool,
    /// Subtract F_env from the force channel in bilateral mode.
    pub env_correction: bool,
    pub observer: ObserverConfig,
    pub direct_rate_cutoff_hz: Option<f64>,
    /// m; any position beyond this aborts the run
    pub divergence_bound: f64,
    /// Ticks between live snapshots.
    pub snapshot_every: u64,
    pub out: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioId::Custom,
            controller: ControllerKind::Iac,
            estimator: EstimatorKind::Direct,
            dt: 1e-3,
            duration: 10.0,
            delta: 0.1,
            seed: 0,
            leader: PointMassParams::default(),
            follower: PointMassParams::default(),
            operator: OperatorModel::default(),
            seeded_operator: None,
            leader_initial: None,
            follower_initial: None,
            stiffness: StiffnessSchedule::Constant { l1: 500.0 },
            grasp_map: GraspMap::default(),
            rate_limit: true,
            coupling: crate::impedance::DEFAULT_COUPLING,
            rate_margin: 0.99,
            contact: ContactModel::None,
            leader_contact: ContactModel::None,
            bilateral: false,
            env_correction: true,
            observer: ObserverConfig::default(),
            direct_rate_cutoff_hz: None,
            divergence_bound: 10.0,
            snapshot_every: 16,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.errors {
            write!(f, " [{}: {}]", e.field, e.reason)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn single(field: &str, reason: impl Into<String>) -> Self {
        Self { errors: vec![FieldError { field: field.into(), reason: reason.into() }] }
    }
}

pub const FIG2_AMPLITUDE: f64 = 0.10;
pub const FIG2_FREQ_HZ: f64 = 0.6;
/// m
const BALLOON_HOVER: f64 = 0.25;
const BALLOON_STROKE: f64 = 0.05;
/// s
const BALLOON_DESCENT: f64 = 5.0;

impl ScenarioConfig {
    /// Built-in scenario for a controller. `Custom` returns the defaults.
    pub fn preset(id: ScenarioId, controller: ControllerKind) -> Self {
        let base = Self { scenario: id, controller, ..Self::default() };
        match id {
            ScenarioId::Fig2 => base.fig2(),
            ScenarioId::FreeTracking => base.free_tracking(),
            ScenarioId::Balloon => base.balloon(),
            ScenarioId::BilateralPolish => base.bilateral_polish(),
            ScenarioId::Custom => base,
        }
    }

    fn fig2(mut self) -> Self {
        let (m, c) = (self.leader.mass, self.leader.viscous_damping);
        let sine = compensated_sine(FIG2_AMPLITUDE, FIG2_FREQ_HZ, m, c, self.operator.l_l1, self.operator.l_l2);
        self.operator.trajectory = [AxisTrajectory::sines(0.0, vec![sine]), AxisTrajectory::default(), AxisTrajectory::default()];
        let w = 2.0 * PI * FIG2_FREQ_HZ;
        // steady-state phase of the leader: x = A sin(ωt)
        self.leader_initial = Some(RobotState::new(Axes::zeros(), Axes::new(FIG2_AMPLITUDE * w, 0.0, 0.0)));
        self.delta = 0.0;
        self.duration = 10.0;
        self.stiffness = StiffnessSchedule::Window { base: 500.0, low: 50.0, start: 2.0, end: 8.0 };
        self.rate_limit = false;
        self
    }

    fn free_tracking(mut self) -> Self {
        self.seeded_operator = Some(SeededOperator {
            amplitudes: vec![0.09, 0.06, 0.05],
            period_range: [2.0, 8.0],
            offset: [0.0; 3],
        });
        self.delta = 0.1;
        self.duration = 60.0;
        self.stiffness = StiffnessSchedule::Sinusoid { offset: 700.0, amplitude: 620.0, omega: 0.25 * PI };
        self.rate_limit = true;
        self
    }

    fn balloon(mut self) -> Self {
        self.delta = 0.1;
        self.duration = 8.0 + BALLOON_DESCENT;
        // rapid vertical strokes above the balloon for 5 s, then straight down
        let mut z = vec![[0.0, BALLOON_HOVER]];
        for k in 1..10 {
            let side = if k % 2 == 1 { 1.0 } else { -1.0 };
            z.push([0.5 * k as f64, BALLOON_HOVER + side * BALLOON_STROKE]);
        }
        z.push([5.0, BALLOON_HOVER]);
        z.push([5.0 + BALLOON_DESCENT, 0.048]);
        self.operator.trajectory = [
            AxisTrajectory::default(),
            AxisTrajectory::default(),
            AxisTrajectory { waypoints: z, ..Default::default() },
        ];
        self.contact = ContactModel::Balloon { surface_height: 0.13, stiffness: 200.0, rupture_force: 8.0, ruptured: false };
        // leader table 5 cm above the follower's
        self.leader_contact = ContactModel::RigidTable { surface_height: 0.05, stiffness: 10_000.0, damping: 100.0 };
        let l1 = match self.controller {
            ControllerKind::Iac => 60.0,
            _ => 300.0,
        };
        self.stiffness = StiffnessSchedule::Constant { l1 };
        self.rate_limit = false;
        self
    }

    fn bilateral_polish(mut self) -> Self {
        self.delta = 0.0;
        self.bilateral = true;
        self.duration = 30.0;
        let side = 0.10;
        let leg = (30.0 - 1.0) / 12.0;
        let mut xs = vec![[0.0, 0.0]];
        let mut ys = vec![[0.0, 0.0]];
        // corners (0,0) → (s,0) → (s,s) → (0,s) → (0,0), three laps
        let corners = [(side, 0.0), (side, side), (0.0, side), (0.0, 0.0)];
        for lap in 0..3 {
            for (i, (cx, cy)) in corners.iter().enumerate() {
                let t = 1.0 + (lap * 4 + i + 1) as f64 * leg;
                xs.push([t, *cx]);
                ys.push([t, *cy]);
            }
        }
        xs.insert(1, [1.0, 0.0]);
        ys.insert(1, [1.0, 0.0]);
        self.operator.trajectory = [
            AxisTrajectory { waypoints: xs, ..Default::default() },
            AxisTrajectory { waypoints: ys, ..Default::default() },
            AxisTrajectory { waypoints: vec![[0.0, 0.02], [1.0, -0.06]], ..Default::default() },
        ];
        self.contact = ContactModel::RigidTable { surface_height: 0.0, stiffness: 5_000.0, damping: 50.0 };
        self.leader_contact = ContactModel::RigidTable { surface_height: -0.04, stiffness: 10_000.0, damping: 100.0 };
        self.stiffness = StiffnessSchedule::Grasp {
            profile: GraspProfile::Trapezoid { peak: 20.0, start: 0.0, rise: 10.0, hold: 10.0, fall: 10.0 },
            map: self.grasp_map,
        };
        self.rate_limit = true;
        self
    }

    /// Operator model with any seeded path expanded.
    pub fn resolved_operator(&self) -> OperatorModel {
        let mut op = self.operator.clone();
        if let Some(s) = &self.seeded_operator {
            op.trajectory = s.trajectories(self.seed);
        }
        op
    }

    pub fn ticks(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut err = |field: &str, reason: String| errors.push(FieldError { field: field.into(), reason });
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            err("dt", format!("must be > 0, got {}", self.dt));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            err("duration", format!("must be >= 0, got {}", self.duration));
        } else if self.dt > 0.0 && ((self.duration / self.dt).round() * self.dt - self.duration).abs() > 1e-9 * self.duration.max(1.0) {
            err("duration", format!("must be a whole number of dt steps ({} / {})", self.duration, self.dt));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            err("delta", format!("must be >= 0, got {}", self.delta));
        }
        if self.bilateral && self.delta != 0.0 {
            err("delta", format!("bilateral mode requires zero delay, got {}", self.delta));
        }
        if let Err(e) = self.leader.validate() {
            err("leader", e.to_string());
        }
        if let Err(e) = self.follower.validate() {
            err("follower", e.to_string());
        }
        if !self.operator.is_valid() {
            err("operator", "arm gains must be finite and > 0".into());
        }
        if let Some(s) = &self.seeded_operator {
            if !(s.period_range[0] > 0.0 && s.period_range[1] > s.period_range[0]) {
                err("seeded_operator.period_range", format!("{:?} is not an increasing positive range", s.period_range));
            }
        }
        if let Err(e) = self.stiffness.validate() {
            err("stiffness", e.to_string());
        }
        if let Err(e) = self.grasp_map.validate() {
            err("grasp_map", e.to_string());
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            err("coupling", format!("must be > 0, got {}", self.coupling));
        }
        if !(self.rate_margin > 0.0 && self.rate_margin < 1.0) {
            err("rate_margin", format!("must lie in (0, 1), got {}", self.rate_margin));
        }
        if let Err(e) = self.contact.validate() {
            err("contact", e);
        }
        if let Err(e) = self.leader_contact.validate() {
            err("leader_contact", e);
        }
        if let Err(e) = self.observer.validate() {
            err("observer", e.to_string());
        }
        if !(self.divergence_bound > 0.0) {
            err("divergence_bound", format!("must be > 0, got {}", self.divergence_bound));
        }
        if self.snapshot_every == 0 {
            err("snapshot_every", "must be >= 1".into());
        }
        for (name, st) in [("leader_initial", &self.leader_initial), ("follower_initial", &self.follower_initial)] {
            if let Some(s) = st {
                if !s.is_finite() {
                    err(name, "non-finite state".into());
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { errors })
        }
    }

    /// Overlay a (possibly partial) JSON object on this config.
    pub fn merged_with(&self, overlay: &serde_json::Value) -> Result<Self, ConfigError> {
        let mut base = serde_json::to_value(self).map_err(|e| ConfigError::single("config", e.to_string()))?;
        merge(&mut base, overlay);
        serde_json::from_value(base).map_err(|e| ConfigError::single("config", e.to_string()))
    }
}

fn merge(base: &mut serde_json::Value, overlay: &serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

//! Operator impedance pipeline: grasp map, damping coupling, and the
//! stiffness rate limiter `L̇1 < 2αL1 − αL̇2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Axes;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpedanceError {
    #[error("grasp force must be finite and >= 0, got {0}")]
    NegativeGrasp(f64),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

pub const DEFAULT_COUPLING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspMap {
    /// N/m at zero grasp
    pub k_min: f64,
    /// (N/m)/N
    pub slope: f64,
    /// N/m
    pub saturation: f64,
}

impl Default for GraspMap {
    fn default() -> Self {
        Self {
            k_min: 80.0,
            slope: 62.0,
            saturation: 1320.0,
        }
    }
}

impl GraspMap {
    pub fn validate(&self) -> Result<(), ImpedanceError> {
        if !(self.k_min > 0.0 && self.k_min.is_finite()) {
            return Err(ImpedanceError::InvalidParam {
                field: "grasp_map.k_min",
                reason: format!("must be > 0, got {}", self.k_min),
            });
        }
        if !(self.slope >= 0.0 && self.slope.is_finite()) {
            return Err(ImpedanceError::InvalidParam {
                field: "grasp_map.slope",
                reason: format!("must be >= 0, got {}", self.slope),
            });
        }
        if !(self.saturation >= self.k_min && self.saturation.is_finite()) {
            return Err(ImpedanceError::InvalidParam {
                field: "grasp_map.saturation",
                reason: format!("must be >= k_min, got {}", self.saturation),
            });
        }
        Ok(())
    }
}

pub fn grasp_to_stiffness(grasp: f64, map: &GraspMap) -> Result<f64, ImpedanceError> {
    if !(grasp >= 0.0 && grasp.is_finite()) {
        return Err(ImpedanceError::NegativeGrasp(grasp));
    }
    Ok((map.k_min + map.slope * grasp).clamp(map.k_min, map.saturation))
}

pub fn damping_from_stiffness(l1: f64) -> f64 {
    DEFAULT_COUPLING * l1
}

/// `α = min(L2) / M` for diagonal damping and scalar mass.
pub fn alpha_bound(l2: &Axes, mass: f64) -> f64 {
    l2.min() / mass
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimiterState {
    pub l1: Axes,
    pub l2: Axes,
    /// 1/s
    pub alpha: f64,
    /// kg
    pub mass_bound: f64,
    /// L2 = coupling · L1
    pub coupling: f64,
    /// Fraction of the continuous bound allowed per tick.
    pub margin: f64,
}

impl RateLimiterState {
    pub fn new(initial_l1: Axes, mass_bound: f64) -> Self {
        Self::with_coupling(initial_l1, mass_bound, DEFAULT_COUPLING, 0.99)
    }

    pub fn with_coupling(initial_l1: Axes, mass_bound: f64, coupling: f64, margin: f64) -> Self {
        let l2 = initial_l1 * coupling;
        Self {
            l1: initial_l1,
            l2,
            alpha: alpha_bound(&l2, mass_bound),
            mass_bound,
            coupling,
            margin,
        }
    }

    /// Largest per-second increase of L1 allowed on an axis at stiffness `l1`.
    pub fn rate_bound(&self, l1: f64) -> f64 {
        2.0 * self.alpha * l1 / (1.0 + self.coupling * self.alpha)
    }
}

/// Shape a desired stiffness. Decreases pass through; increases are clamped
/// to `margin` of the coupled bound.
pub fn shape_stiffness(desired: &Axes, state: &RateLimiterState, dt: f64) -> (Axes, Axes, RateLimiterState) {
    let mut next = *state;
    for i in 0..3 {
        let cur = state.l1[i];
        let want = desired[i];
        next.l1[i] = if want <= cur {
            want
        } else {
            want.min(cur + state.margin * dt * state.rate_bound(cur))
        };
    }
    next.l2 = next.l1 * state.coupling;
    next.alpha = alpha_bound(&next.l2, state.mass_bound);
    (next.l1, next.l2, next)
}

/// Discrete check of `L̇1 < 2αL1 − αL̇2` between consecutive ticks, with α
/// taken from the earlier tick.
pub fn satisfies_rate_bound(
    prev_l1: &Axes,
    prev_l2: &Axes,
    next_l1: &Axes,
    next_l2: &Axes,
    mass: f64,
    dt: f64,
) -> bool {
    let alpha = alpha_bound(prev_l2, mass);
    (0..3).all(|i| {
        let l1_dot = (next_l1[i] - prev_l1[i]) / dt;
        let l2_dot = (next_l2[i] - prev_l2[i]) / dt;
        l1_dot == 0.0 || l1_dot < 2.0 * alpha * prev_l1[i] - alpha * l2_dot
    })
}

/// Grasp force over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraspProfile {
    Constant { grasp: f64 },
    /// 0 → peak over `rise`, hold, then back to 0 over `fall`.
    Trapezoid { peak: f64, start: f64, rise: f64, hold: f64, fall: f64 },
}

impl GraspProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            GraspProfile::Constant { grasp } => grasp,
            GraspProfile::Trapezoid { peak, start, rise, hold, fall } => {
                let s = t - start;
                if s <= 0.0 {
                    0.0
                } else if s < rise {
                    peak * s / rise
                } else if s < rise + hold {
                    peak
                } else if s < rise + hold + fall {
                    peak * (1.0 - (s - rise - hold) / fall)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Operator-commanded stiffness before shaping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StiffnessSchedule {
    Constant { l1: f64 },
    /// `base` outside `[start, end)`, `low` inside.
    Window { base: f64, low: f64, start: f64, end: f64 },
    Step { from: f64, to: f64, at: f64 },
    /// `offset + amplitude · sin(omega · t)`
    Sinusoid { offset: f64, amplitude: f64, omega: f64 },
    /// Linear rise from `from` to `to` over `[start, start + duration]`.
    Ramp { from: f64, to: f64, start: f64, duration: f64 },
    Grasp { profile: GraspProfile, map: GraspMap },
}

impl StiffnessSchedule {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            StiffnessSchedule::Constant { l1 } => *l1,
            StiffnessSchedule::Window { base, low, start, end } => {
                if t >= *start - 1e-12 && t < *end - 1e-12 {
                    *low
                } else {
                    *base
                }
            }
            StiffnessSchedule::Step { from, to, at } => {
                if t >= *at - 1e-12 {
                    *to
                } else {
                    *from
                }
            }
            StiffnessSchedule::Sinusoid { offset, amplitude, omega } => offset + amplitude * (omega * t).sin(),
            StiffnessSchedule::Ramp { from, to, start, duration } => {
                let s = ((t - start) / duration).clamp(0.0, 1.0);
                from + (to - from) * s
            }
            StiffnessSchedule::Grasp { profile, map } => {
                grasp_to_stiffness(profile.at(t).max(0.0), map).unwrap_or(map.k_min)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ImpedanceError> {
        let bad = |field: &'static str, v: f64| ImpedanceError::InvalidParam {
            field,
            reason: format!("stiffness must stay > 0, got {v}"),
        };
        match self {
            StiffnessSchedule::Constant { l1 } if !(*l1 > 0.0) => Err(bad("schedule.l1", *l1)),
            StiffnessSchedule::Window { base, low, .. } if !(*base > 0.0 && *low > 0.0) => {
                Err(bad("schedule.low", base.min(*low)))
            }
            StiffnessSchedule::Step { from, to, .. } if !(*from > 0.0 && *to > 0.0) => {
                Err(bad("schedule.to", from.min(*to)))
            }
            StiffnessSchedule::Sinusoid { offset, amplitude, .. } if !(offset - amplitude.abs() > 0.0) => {
                Err(bad("schedule.offset", offset - amplitude.abs()))
            }
            StiffnessSchedule::Ramp { from, to, duration, .. } if !(*from > 0.0 && *to > 0.0 && *duration > 0.0) => {
                Err(bad("schedule.from", from.min(*to)))
            }
            StiffnessSchedule::Grasp { map, .. } => map.validate(),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grasp_map_examples() {
        let m = GraspMap::default();
        assert_eq!(grasp_to_stiffness(0.0, &m).unwrap(), 80.0);
        let m2 = GraspMap { k_min: 80.0, slope: 20.0, saturation: 1320.0 };
        assert_eq!(grasp_to_stiffness(10.0, &m2).unwrap(), 280.0);
        assert_eq!(grasp_to_stiffness(20.0, &m).unwrap(), 1320.0);
        assert_eq!(grasp_to_stiffness(100.0, &m).unwrap(), 1320.0);
        assert!(grasp_to_stiffness(-1.0, &m).is_err());
    }

    #[test]
    fn damping_coupling() {
        assert_eq!(damping_from_stiffness(500.0), 50.0);
        assert_eq!(damping_from_stiffness(80.0), 8.0);
        assert!((damping_from_stiffness(1320.0) - 132.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_bound(&Axes::repeat(50.0), 12.8), 3.90625);
        assert_eq!(alpha_bound(&Axes::new(8.0, 50.0, 132.0), 12.8), 0.625);
        assert_eq!(alpha_bound(&Axes::repeat(7.0), 2.0), 3.5);
    }

    #[test]
    fn first_tick_of_step() {
        let st = RateLimiterState::new(Axes::repeat(80.0), 12.8);
        assert_eq!(st.alpha, 0.625);
        let bound = st.rate_bound(80.0);
        assert!((bound - 100.0 / 1.0625).abs() < 1e-12);
        assert!((bound - 94.1176).abs() < 1e-4);
        let (l1, l2, _) = shape_stiffness(&Axes::repeat(1320.0), &st, 1e-3);
        let inc = l1.x - 80.0;
        assert!(inc <= 0.0941 && inc > 0.093, "{inc}");
        assert_eq!(l2, l1 * 0.1);
    }

    #[test]
    fn decreases_and_fixed_point() {
        let st = RateLimiterState::new(Axes::repeat(800.0), 12.8);
        let (l1, _, _) = shape_stiffness(&Axes::repeat(120.0), &st, 1e-3);
        assert_eq!(l1, Axes::repeat(120.0));
        let (l1, _, st2) = shape_stiffness(&Axes::repeat(800.0), &st, 1e-3);
        assert_eq!(l1, Axes::repeat(800.0));
        assert_eq!(st2, st);
    }

    #[test]
    fn trapezoid_profile() {
        let p = GraspProfile::Trapezoid { peak: 20.0, start: 0.0, rise: 10.0, hold: 10.0, fall: 10.0 };
        assert_eq!(p.at(0.0), 0.0);
        assert_eq!(p.at(5.0), 10.0);
        assert_eq!(p.at(15.0), 20.0);
        assert_eq!(p.at(25.0), 10.0);
        assert_eq!(p.at(30.0), 0.0);
    }

    fn shaped(signal: &[f64]) -> Vec<f64> {
        let mut st = RateLimiterState::new(Axes::repeat(signal[0]), 12.8);
        signal
            .iter()
            .map(|&d| {
                let (l1, _, s) = shape_stiffness(&Axes::repeat(d), &st, 1e-3);
                st = s;
                l1.x
            })
            .collect()
    }

    proptest! {
        #[test]
        fn bound_holds_for_any_signal(signal in prop::collection::vec(80.0f64..1320.0, 2..400)) {
            let mut st = RateLimiterState::new(Axes::repeat(signal[0]), 12.8);
            for &d in &signal {
                let (l1, l2, next) = shape_stiffness(&Axes::repeat(d), &st, 1e-3);
                prop_assert!(satisfies_rate_bound(&st.l1, &st.l2, &l1, &l2, 12.8, 1e-3));
                st = next;
            }
        }

        #[test]
        fn shaping_is_monotone(
            base in prop::collection::vec(80.0f64..1320.0, 2..300),
            bump in prop::collection::vec(0.0f64..500.0, 300),
        ) {
            let hi: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let mut hi = hi;
            hi[0] = base[0];
            let a = shaped(&base);
            let b = shaped(&hi);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(y >= x);
            }
        }
    }
}

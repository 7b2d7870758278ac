use serde::{Deserialize, Serialize};

use super::trace::{ScenarioTrace, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    /// N/m, inclusive
    pub lo: f64,
    /// N/m, exclusive
    pub hi: f64,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: usize,
    pub mean_error: f64,
    pub max_error: f64,
    pub rms_error: f64,
    /// Error binned by the mean stiffness over axes; empty bins are absent.
    pub bins: Vec<BinStat>,
    /// m/s², from second differences of follower position
    pub peak_acceleration: f64,
    /// N
    pub peak_contact_force: f64,
    pub ruptured: bool,
    /// s with nonzero contact force
    pub contact_duration: f64,
    /// s without contact force
    pub free_duration: f64,
    /// RMS error over the rows before first contact (all rows if none).
    pub free_phase_rms_error: f64,
}

/// Euclidean error over the in-plane axes.
pub fn xy_error(row: &TraceRow) -> f64 {
    (row.x.x - row.x_l.x).hypot(row.x.y - row.x_l.y)
}

// a balloon rupture shows as a one-tick drop to zero from a loaded contact
const RUPTURE_MIN_FORCE: f64 = 2.0;

pub fn compute_metrics(trace: &ScenarioTrace, bins: &[f64]) -> MetricsReport {
    let rows = &trace.rows;
    let n = rows.len();
    let dt = if trace.dt > 0.0 {
        trace.dt
    } else if n >= 2 {
        rows[1].t - rows[0].t
    } else {
        0.0
    };
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let mean_error = mean(&errs);
    let max_error = errs.iter().cloned().fold(0.0, f64::max);
    let rms_error = mean(&errs.iter().map(|e| e * e).collect::<Vec<_>>()).sqrt();

    let mut stats = Vec::new();
    for w in bins.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let sel: Vec<f64> = rows
            .iter()
            .filter(|r| {
                let k = r.l1.mean();
                k >= lo && k < hi
            })
            .map(|r| r.error)
            .collect();
        if sel.is_empty() {
            continue;
        }
        let m = mean(&sel);
        let var = sel.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / sel.len() as f64;
        stats.push(BinStat { lo, hi, count: sel.len(), mean: m, std: var.sqrt() });
    }

    let mut peak_acceleration = 0.0f64;
    if n >= 3 && dt > 0.0 {
        for k in 1..n - 1 {
            let a = (rows[k + 1].x - rows[k].x * 2.0 + rows[k - 1].x) / (dt * dt);
            peak_acceleration = peak_acceleration.max(a.norm());
        }
    }
    let forces: Vec<f64> = rows.iter().map(|r| r.f_env.norm()).collect();
    let peak_contact_force = forces.iter().cloned().fold(0.0, f64::max);
    let ruptured = forces.windows(2).any(|w| w[0] >= RUPTURE_MIN_FORCE && w[1] == 0.0);
    let contact_ticks = forces.iter().filter(|f| **f > 0.0).count();
    let first_contact = forces.iter().position(|f| *f > 0.0).unwrap_or(n);
    let free_rms = mean(&errs[..first_contact].iter().map(|e| e * e).collect::<Vec<_>>()).sqrt();

    MetricsReport {
        rows: n,
        mean_error,
        max_error,
        rms_error,
        bins: stats,
        peak_acceleration,
        peak_contact_force,
        ruptured,
        contact_duration: contact_ticks as f64 * dt,
        free_duration: (n - contact_ticks) as f64 * dt,
        free_phase_rms_error: free_rms,
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

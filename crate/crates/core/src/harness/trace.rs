use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Axes;

pub const TRACE_HEADER: [&str; 29] = [
    "t", "x_l_x", "x_l_y", "x_l_z", "xdot_l_x", "xdot_l_y", "xdot_l_z", "x_x", "x_y", "x_z", "tau_x", "tau_y",
    "tau_z", "l1_x", "l1_y", "l1_z", "l2_x", "l2_y", "l2_z", "u_l_x", "u_l_y", "u_l_z", "u_x", "u_y", "u_z",
    "f_env_x", "f_env_y", "f_env_z", "error",
];

fn header() -> &'static [&'static str] {
    &TRACE_HEADER
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x_l: Axes,
    pub xdot_l: Axes,
    pub x: Axes,
    pub tau: Axes,
    pub l1: Axes,
    pub l2: Axes,
    pub u_l: Axes,
    pub u: Axes,
    pub f_env: Axes,
    /// ‖x − x_l‖₂
    pub error: f64,
}

impl TraceRow {
    fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(29);
        v.push(self.t);
        for a in [&self.x_l, &self.xdot_l, &self.x, &self.tau, &self.l1, &self.l2, &self.u_l, &self.u, &self.f_env] {
            v.extend_from_slice(a.as_slice());
        }
        v.push(self.error);
        v
    }

    fn from_values(v: &[f64]) -> Self {
        let ax = |i: usize| Axes::new(v[i], v[i + 1], v[i + 2]);
        Self {
            t: v[0],
            x_l: ax(1),
            xdot_l: ax(4),
            x: ax(7),
            tau: ax(10),
            l1: ax(13),
            l2: ax(16),
            u_l: ax(19),
            u: ax(22),
            f_env: ax(25),
            error: v[28],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

fn write_csv<W: Write>(trace: &ScenarioTrace, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header())?;
    let mut buf = Vec::with_capacity(29);
    for row in &trace.rows {
        buf.clear();
        // shortest round-trip decimal form
        buf.extend(row.values().iter().map(|v| v.to_string()));
        wr.write_record(&buf)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn trace_csv_string(trace: &ScenarioTrace) -> String {
    let mut out = Vec::new();
    write_csv(trace, &mut out).expect("writing to memory");
    String::from_utf8(out).expect("csv is ascii")
}

pub fn export_trace(trace: &ScenarioTrace, path: &Path) -> Result<(), TraceError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| TraceError::Io { path: dir.into(), source })?;
    }
    let f = File::create(path).map_err(|source| TraceError::Io { path: path.into(), source })?;
    write_csv(trace, io::BufWriter::new(f)).map_err(|source| TraceError::Csv { path: path.into(), source })
}

pub fn read_trace(path: &Path) -> Result<ScenarioTrace, TraceError> {
    let csv_err = |source| TraceError::Csv { path: path.into(), source };
    let fmt_err = |reason: String| TraceError::Format { path: path.into(), reason };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let hdr: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if hdr != header() {
        return Err(fmt_err(format!("unexpected header {:?}", hdr)));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| fmt_err(format!("row {}: {e}", i + 1)))?;
        if vals.len() != 29 {
            return Err(fmt_err(format!("row {}: expected 29 fields, got {}", i + 1, vals.len())));
        }
        rows.push(TraceRow::from_values(&vals));
    }
    let dt = if rows.len() >= 2 { rows[1].t - rows[0].t } else { 0.0 };
    Ok(ScenarioTrace { dt, rows })
}

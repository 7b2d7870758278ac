//! Static SVG line charts of a trace, one file per quantity.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::trace::ScenarioTrace;

const W: f64 = 900.0;
const H: f64 = 300.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#9467bd", "#2ca02c"];
const MAX_POINTS: usize = 2000;

/// Render named series against `t`.
pub fn render_svg(title: &str, t: &[f64], series: &[(&str, Vec<f64>)]) -> String {
    let stride = t.len().div_ceil(MAX_POINTS).max(1);
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, ys) in series {
        for y in ys.iter().filter(|y| y.is_finite()) {
            lo = lo.min(*y);
            hi = hi.max(*y);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let sx = |v: f64| PAD + (v - t0) / (t1 - t0).max(1e-12) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, title);
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.4}</text>"#, PAD - 4.0, PAD + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo:.4}</text>"#, PAD - 4.0, H - PAD + 4.0);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">{t0:.2} s</text>"#, H - PAD + 18.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t1:.2} s</text>"#, W - PAD, H - PAD + 18.0);
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        for k in (0..t.len().min(ys.len())).step_by(stride) {
            if ys[k].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(t[k]), sy(ys[k]));
            }
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.trim_end());
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#, W - PAD - 120.0, PAD + 16.0 + 14.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

/// Write the standard chart set for a trace into `dir`.
pub fn write_plots(trace: &ScenarioTrace, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let t: Vec<f64> = trace.rows.iter().map(|r| r.t).collect();
    let col = |f: &dyn Fn(&super::trace::TraceRow) -> f64| trace.rows.iter().map(f).collect::<Vec<f64>>();
    let mut charts: Vec<(String, Vec<(&str, Vec<f64>)>)> = Vec::new();
    for (i, axis) in ["x", "y", "z"].iter().enumerate() {
        charts.push((
            format!("position_{axis}"),
            vec![("leader", col(&|r| r.x_l[i])), ("follower", col(&|r| r.x[i])), ("target", col(&|r| r.tau[i]))],
        ));
    }
    charts.push(("stiffness".into(), vec![("l1_x", col(&|r| r.l1.x)), ("l2_x", col(&|r| r.l2.x))]));
    charts.push((
        "contact_force".into(),
        vec![("f_env_x", col(&|r| r.f_env.x)), ("f_env_y", col(&|r| r.f_env.y)), ("f_env_z", col(&|r| r.f_env.z))],
    ));
    charts.push(("error".into(), vec![("error", col(&|r| r.error))]));
    let mut out = Vec::new();
    for (name, series) in charts {
        let path = dir.join(format!("{name}.svg"));
        std::fs::write(&path, render_svg(&name, &t, &series))?;
        out.push(path);
    }
    Ok(out)
}

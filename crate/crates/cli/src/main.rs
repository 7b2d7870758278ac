use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iac_core::harness::{
    compute_metrics, export_trace, plot, read_trace, run_scenario, serve_session, ConfigError, ControllerKind,
    EngineError, ScenarioConfig, ScenarioId,
};
use log::info;

#[derive(Parser)]
#[command(name = "iac", version, about = "Teleoperation simulator with immediate and target impedance control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write its trace as CSV.
    Run {
        #[arg(long)]
        scenario: Option<ScenarioId>,
        #[arg(long)]
        controller: Option<ControllerKind>,
        #[arg(long)]
        delay_ms: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON file overlaid on the scenario preset; flags win over it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize a trace as JSON.
    Metrics {
        trace: PathBuf,
        /// Comma-separated stiffness bin edges in N/m.
        #[arg(long, value_delimiter = ',', default_value = "0,250,500,750,1000,1250,1500")]
        bins: Vec<f64>,
    },
    /// Serve an interactive session over a websocket.
    Serve {
        #[arg(long, default_value = "balloon")]
        scenario: ScenarioId,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "iac")]
        controller: ControllerKind,
    },
    /// Write SVG line charts of a trace.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Diverged(String),
    Other(String),
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => Failure::Config(c.to_string()),
            d @ EngineError::Diverged { .. } => Failure::Diverged(d.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_overlay(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    scenario: Option<ScenarioId>,
    controller: Option<ControllerKind>,
    delay_ms: Option<u64>,
    dt: Option<f64>,
    duration: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
) -> Result<ScenarioConfig, Failure> {
    let overlay = config.as_deref().map(load_overlay).transpose()?;
    let from_file = |key: &str| overlay.as_ref().and_then(|o| o.get(key)).cloned();
    let scenario = match scenario {
        Some(s) => s,
        None => match from_file("scenario") {
            Some(v) => serde_json::from_value(v).map_err(|e| Failure::Config(format!("scenario: {e}")))?,
            None => ScenarioId::Fig2,
        },
    };
    let controller = match controller {
        Some(c) => c,
        None => match from_file("controller") {
            Some(v) => serde_json::from_value(v).map_err(|e| Failure::Config(format!("controller: {e}")))?,
            None => ControllerKind::Iac,
        },
    };
    let mut cfg = ScenarioConfig::preset(scenario, controller);
    if let Some(o) = &overlay {
        cfg = cfg.merged_with(o)?;
    }
    cfg.controller = controller;
    if let Some(ms) = delay_ms {
        cfg.delta = ms as f64 / 1000.0;
    }
    if let Some(v) = dt {
        cfg.dt = v;
    }
    if let Some(v) = duration {
        cfg.duration = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(p) = out {
        cfg.out = Some(p.to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, controller, delay_ms, dt, duration, seed, out, config } => {
            let cfg = build_config(scenario, controller, delay_ms, dt, duration, seed, out, config)?;
            let path = PathBuf::from(cfg.out.clone().unwrap_or_else(|| format!("{}_{}.csv", cfg.scenario, cfg.controller)));
            info!("running {} with {} for {} s", cfg.scenario, cfg.controller, cfg.duration);
            let trace = run_scenario(&cfg)?;
            export_trace(&trace, &path).map_err(|e| Failure::Other(e.to_string()))?;
            let report = compute_metrics(&trace, &[]);
            println!(
                "{}",
                serde_json::json!({
                    "trace": path,
                    "rows": report.rows,
                    "mean_error": report.mean_error,
                    "max_error": report.max_error,
                    "peak_contact_force": report.peak_contact_force,
                    "ruptured": report.ruptured,
                })
            );
            Ok(())
        }
        Command::Metrics { trace, bins } => {
            let tr = read_trace(&trace).map_err(|e| Failure::Other(e.to_string()))?;
            let report = compute_metrics(&tr, &bins);
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Serve { scenario, port, controller } => {
            let cfg = ScenarioConfig::preset(scenario, controller);
            let handle = serve_session(cfg, port)?;
            eprintln!("serving {scenario} on ws://{}", handle.local_addr());
            handle.join();
            Ok(())
        }
        Command::Plot { trace, out } => {
            let tr = read_trace(&trace).map_err(|e| Failure::Other(e.to_string()))?;
            let files = plot::write_plots(&tr, &out).map_err(|e| Failure::Other(e.to_string()))?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

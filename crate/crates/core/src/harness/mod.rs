//! Scenarios, the tick engine, traces, metrics and the live session.

mod config;
mod engine;
mod metrics;
pub mod plot;
mod session;
mod trace;

pub use config::{
    ConfigError, ControllerKind, EstimatorKind, FieldError, ScenarioConfig, ScenarioId, SeededOperator,
};
pub use engine::{run_scenario, run_scenario_with_wire, Engine, EngineError, TickRecord};
pub use metrics::{compute_metrics, xy_error, BinStat, MetricsReport};
pub use session::{serve_session, InputEvent, ServerHandle, Session, Snapshot, SNAPSHOT_VERSION};
pub use trace::{export_trace, read_trace, trace_csv_string, ScenarioTrace, TraceError, TraceRow, TRACE_HEADER};

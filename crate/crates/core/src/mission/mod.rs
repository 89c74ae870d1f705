//! Mission orchestration: configuration, the sense-plan-act state machine, logging and metrics.

pub mod config;
pub mod log;
pub mod metrics;
mod runner;

pub use config::{ConfigError, MissionConfig};
pub use log::{DirectorySink, Event, EventRecord, LogSink, MissionLog, Mode, NullSink};
pub use metrics::{compute_metrics, Explorable, Summary};
pub use runner::{run_mission, run_mission_with_sink, MissionError, MissionOutcome, MissionResult};

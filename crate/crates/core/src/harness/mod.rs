//! Scenario configuration, the closed-loop runner, the gain sweep and the
//! CSV/SVG artifact writers.

pub mod artifacts;
pub mod config;
pub mod run;
pub mod svg;
pub mod sweep;

pub use artifacts::{emit_run, emit_sweep, run_csv, sweep_csv};
pub use config::{load_config, ScenarioConfig};
pub use run::{run, LogRow, RunFailure, RunLog};
pub use sweep::{sweep_gamma, SweepMetrics, SweepResult, SweepRow};

//! Scenario files, the filtering driver and per-step metrics.

pub mod bundled;
pub mod driver;
pub mod format;
pub mod metrics;

pub use bundled::builtin;
pub use driver::{run_compare, run_filter, run_oracle, summarize, CountSummary, FilterRun, OracleRun, ORACLE_TOLERANCE};
pub use format::{load_observations, RunOptions, Scenario, SCENARIO_SCHEMA};
pub use metrics::{emit_metrics, render_metrics, Format, StepMetrics, CSV_COLUMNS};

use std::path::Path;

use crate::error::Result;

/// Loads `builtin:<name>` or a scenario file path.
pub fn resolve(source: &str) -> Result<Scenario> {
    match source.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => Scenario::load(Path::new(source)),
    }
}

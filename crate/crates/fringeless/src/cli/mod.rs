//! Command-line front end: configuration loading, trace file I/O,
//! experiment orchestration, and machine-readable reports.

mod config;
mod report;
mod runner;
mod trace_io;

pub use config::{load_config, Experiment, OutputFormat, RunConfig};
pub use report::{render_csv_sensitivity, render_csv_sweep, render_report_json};
pub use runner::{run_experiment, ExperimentArtifacts};
pub use trace_io::{ingest_trace, write_trace};

use crate::error::Error;

/// Process exit code for an error: 2 configuration, 3 ingestion,
/// 4 pipeline/regime.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => 2,
        Error::Ingestion { .. } => 3,
        Error::AtVoltageIndex { source, .. } => exit_code(source),
        _ => 4,
    }
}

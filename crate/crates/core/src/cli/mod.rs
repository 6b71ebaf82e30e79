//! Config parsing, subcommand dispatch and deterministic report files.

pub mod config;
mod report;
mod run;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use report::{emit_reports, format_real, Cell, ReportEnvelope, Subcommand};
pub use run::run_subcommand;

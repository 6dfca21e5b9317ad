//! Configuration, data ingestion, experiment dispatch and result emission for the
//! `capdyn` command-line tool.

pub mod config;
pub mod emit;
pub mod experiment;
pub mod ingest;

pub use config::{ConfigError, Format, RunConfig};
pub use emit::{Cell, ResultManifest, Table};
pub use experiment::{build_tables, run_experiment, Experiment, Preset, RunError};

//! Experiment configuration, orchestration and file output for `nhmc`.
//!
//! A run is described by one TOML document (see `schema/experiment.schema.json`
//! and the presets under `presets/`). [`runner::run`] simulates every
//! `(n, seed)` window, evaluates the hypothesis checks and writes
//!
//! * a results table (CSV or JSON) with one row per `(n, seed)`,
//! * a conditions JSON with the grid, values and verdict of every check,
//! * a run manifest echoing the configuration, generator and tool version.
//!
//! Output bytes depend only on the configuration.

pub mod config;
pub mod error;
pub mod format;
pub mod matrix_file;
pub mod output;
pub mod runner;

pub use config::{parse_config, ConfigDocument, ExperimentConfig};
pub use error::CliError;

/// Tool name recorded in manifests.
pub const TOOL_NAME: &str = "nhmc";

/// Tool version recorded in manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of the configuration schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

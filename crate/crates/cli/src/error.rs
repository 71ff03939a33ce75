use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

/// Errors surfaced by the command line, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Domain(#[from] nhmc::Error),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code. The table is printed by `nhmc --help`.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(ConfigError::Parse { .. }) => 3,
            CliError::Config(ConfigError::Validation(_)) => 4,
            CliError::Io { .. } => 5,
            CliError::Domain(nhmc::Error::NotIrreducible { .. }) => 6,
            CliError::Domain(nhmc::Error::OverflowRisk { .. }) => 7,
            CliError::Domain(_) => 8,
        }
    }
}

/// Exit-code table shown in `--help`.
pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (bad flags or arguments)
  3  config parse error (malformed TOML, unknown keys, wrong types)
  4  config validation error (bad matrices, grids, seeds, thresholds)
  5  I/O error reading inputs or writing outputs
  6  limit matrix is not irreducible
  7  window exceeds the step budget (a_n + phi(n) > step_budget)
  8  other numerical or domain error";

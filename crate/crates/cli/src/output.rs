//! Results, conditions and manifest writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use nhmc::diagnostics::{ConditionReport, ConvergenceRecord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::format::sig9;
use crate::{SCHEMA_VERSION, TOOL_NAME, TOOL_VERSION};

/// Column order of the results table.
pub const RESULT_COLUMNS: [&str; 12] = [
    "n",
    "a_n",
    "phi_n",
    "seed",
    "f",
    "H",
    "abs_err_f",
    "freq_err_max",
    "pair_err_max",
    "h_hat",
    "abs_err_hhat",
    "D_n",
];

/// Lowercase hex SHA-256 of the canonical config text.
pub fn config_digest(config_toml: &str) -> String {
    Sha256::digest(config_toml.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// How every output points back at its manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestRef {
    /// Manifest file name, relative to the output directory.
    pub manifest: String,
    /// Digest of the config echoed in the manifest.
    pub config_sha256: String,
}

/// The run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// Tool name.
    pub tool: &'static str,
    /// Tool version.
    pub version: &'static str,
    /// Config schema version.
    pub schema_version: u32,
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Generator identifier.
    pub rng: String,
    /// Digest of `config`.
    pub config_sha256: String,
    /// Canonical TOML of the effective config (overrides applied).
    pub config: String,
    /// Output role to file name.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    /// Manifest for an effective config.
    pub fn new(command: &str, rng: &str, config_toml: String, outputs: BTreeMap<String, String>) -> Self {
        Self {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            rng: rng.into(),
            config_sha256: config_digest(&config_toml),
            config: config_toml,
            outputs,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        pretty(self)
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

/// Writes the CSV results table. The first line is a `#` comment naming the
/// manifest and config digest; the header follows.
pub fn write_results_csv<W: Write>(
    records: &[ConvergenceRecord],
    manifest: &ManifestRef,
    out: &mut W,
) -> io::Result<()> {
    writeln!(
        out,
        "# manifest={} config_sha256={}",
        manifest.manifest, manifest.config_sha256
    )?;
    writeln!(out, "{}", RESULT_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.a_n,
            r.phi_n,
            r.seed,
            sig9(r.f),
            sig9(r.entropy_rate),
            sig9(r.abs_err_f),
            sig9(r.freq_err_max),
            sig9(r.pair_err_max),
            sig9(r.h_hat),
            sig9(r.abs_err_hhat),
            sig9(r.windowed_deviation),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    #[serde(flatten)]
    manifest: &'a ManifestRef,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct RecordsBody<'a> {
    columns: [&'static str; 12],
    records: &'a [ConvergenceRecord],
}

#[derive(Serialize)]
struct ConditionsBody<'a> {
    conditions: &'a [ConditionReport],
}

/// Results table as JSON.
pub fn results_json(records: &[ConvergenceRecord], manifest: &ManifestRef) -> String {
    pretty(&Tagged {
        manifest,
        body: RecordsBody {
            columns: RESULT_COLUMNS,
            records,
        },
    })
}

/// Condition reports as JSON.
pub fn conditions_json(reports: &[ConditionReport], manifest: &ManifestRef) -> String {
    pretty(&Tagged {
        manifest,
        body: ConditionsBody { conditions: reports },
    })
}

//! The experiment configuration document and its validation.
//!
//! Configurations are TOML. Unknown keys are rejected, and validation
//! reports every problem it finds rather than stopping at the first.

use std::fmt;

use nhmc::diagnostics::{SamplingMode, DEFAULT_DEVIATION_THRESHOLD};
use nhmc::sim::DEFAULT_STEP_BUDGET;
use nhmc::{
    Decay, Distribution, LengthRule, OffsetRule, RngId, Segment, StochasticMatrix, TransitionSchedule, WindowPlan,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SCHEMA_VERSION;

/// A real number written either as a TOML number or as a string holding a
/// decimal or a ratio such as `"1/3"` or `"-1/20"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    /// Plain number.
    Number(f64),
    /// `"p/q"` or a decimal string.
    Text(String),
}

impl Real {
    /// Numeric value.
    pub fn value(&self) -> Result<f64, String> {
        match self {
            Real::Number(x) => Ok(*x),
            Real::Text(s) => parse_real(s),
        }
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::Number(x)
    }
}

/// Parses `"p/q"` or a decimal.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let parsed = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            num / den
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if parsed.is_finite() {
        Ok(parsed)
    } else {
        Err(format!("not a finite number: {s:?}"))
    }
}

/// Matrix as a list of rows.
pub type MatrixSpec = Vec<Vec<Real>>;

/// The `[schedule]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `P_k = limit` for every step.
    Constant {
        /// The matrix.
        limit: MatrixSpec,
    },
    /// `P_k = limit + c_k · direction`.
    Perturbed {
        /// Limit matrix.
        limit: MatrixSpec,
        /// Zero-row-sum direction.
        direction: MatrixSpec,
        /// Coefficients `c_k`.
        decay: DecaySpec,
    },
    /// The built-in two-state schedule that switches to `[[1/3, 2/3], [2/3, 1/3]]`
    /// on `2^m ≤ k ≤ 2^m + m` and is uniform elsewhere.
    Counterexample,
    /// Listed matrices on step ranges, `limit` elsewhere.
    Piecewise {
        /// Limit matrix and default.
        limit: MatrixSpec,
        /// Step ranges.
        segments: Vec<SegmentSpec>,
    },
}

/// `decay` table of a perturbed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecaySpec {
    /// `scale / k`.
    Harmonic {
        /// Coefficient at step 1.
        scale: f64,
    },
    /// `scale · k^(-exponent)`.
    Power {
        /// Coefficient at step 1.
        scale: f64,
        /// Positive exponent.
        exponent: f64,
    },
    /// `scale · ratio^(k-1)`.
    Geometric {
        /// Coefficient at step 1.
        scale: f64,
        /// Ratio in (0, 1).
        ratio: f64,
    },
}

/// One `[[schedule.segments]]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// First step.
    pub start: u64,
    /// Last step, inclusive.
    pub end: u64,
    /// Matrix on the range.
    pub matrix: MatrixSpec,
}

/// `window.offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OffsetSpec {
    /// `a_n = 0`.
    Zero,
    /// `a_n = n`.
    Linear,
    /// `a_n = 2^n`.
    PowerOfTwo,
    /// `a_n = custom[n]`.
    Custom(Vec<u64>),
}

/// `window.length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthSpec {
    /// `φ(n) = n`.
    Linear,
    /// `φ(n) = ⌊n^α⌋`.
    Poly(f64),
    /// `φ(n) = custom[n]`.
    Custom(Vec<u64>),
}

/// `window.mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    /// Independent derived seed per grid point.
    #[default]
    Independent,
    /// One trajectory per seed.
    SingleTrajectory,
}

/// The `[window]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// Offset rule.
    pub offset: OffsetSpec,
    /// Length rule.
    pub length: LengthSpec,
    /// Strictly increasing evaluation indices.
    pub n_grid: Vec<u64>,
    /// Randomness sharing across the grid.
    #[serde(default)]
    pub mode: ModeSpec,
}

/// The `[conditions]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionSpec {
    /// Run the summability check.
    pub summability: bool,
    /// `ε` of the summability series.
    pub epsilon: f64,
    /// Number of summability terms.
    pub cutoff: u64,
    /// Run the windowed Cesàro check on the plan's grid.
    pub windowed: bool,
    /// Run the prefix Cesàro check.
    pub prefix: bool,
    /// Prefix grid; defaults to the window end points `a_n + φ(n)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix_grid: Option<Vec<u64>>,
    /// Deviation ceiling for the Cesàro verdicts.
    pub threshold: f64,
}

impl Default for ConditionSpec {
    fn default() -> Self {
        Self {
            summability: true,
            epsilon: 0.1,
            cutoff: 10_000,
            windowed: true,
            prefix: true,
            prefix_grid: None,
            threshold: DEFAULT_DEVIATION_THRESHOLD,
        }
    }
}

/// Results table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ResultsFormat {
    /// Comma-separated values.
    #[default]
    Csv,
    /// JSON document.
    Json,
}

impl ResultsFormat {
    /// File extension.
    pub fn extension(self) -> &'static str {
        match self {
            ResultsFormat::Csv => "csv",
            ResultsFormat::Json => "json",
        }
    }
}

/// The `[output]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Output directory, relative to the working directory.
    pub dir: String,
    /// Results file stem; the extension follows `format`.
    pub results: String,
    /// Conditions file name.
    pub conditions: String,
    /// Manifest file name.
    pub manifest: String,
    /// Results table format.
    pub format: ResultsFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            results: "results".into(),
            conditions: "conditions.json".into(),
            manifest: "manifest.json".into(),
            format: ResultsFormat::Csv,
        }
    }
}

impl OutputSpec {
    /// Results file name with extension.
    pub fn results_file(&self) -> String {
        format!("{}.{}", self.results, self.format.extension())
    }
}

fn default_rng() -> String {
    RngId::default().as_str().into()
}

fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

/// The document as written, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    /// Must equal [`SCHEMA_VERSION`].
    pub schema_version: u32,
    /// Number of states `b`.
    pub states: usize,
    /// Generator identifier.
    #[serde(default = "default_rng")]
    pub rng: String,
    /// Master seeds; one replication each.
    pub seeds: Vec<u64>,
    /// Cap on `a_n + φ(n)`.
    #[serde(default = "default_budget")]
    pub step_budget: u64,
    /// Initial law.
    pub mu0: Vec<Real>,
    /// Transition schedule.
    pub schedule: ScheduleSpec,
    /// Windows.
    pub window: WindowSpec,
    /// Hypothesis checks.
    #[serde(default)]
    pub conditions: ConditionSpec,
    /// Output files.
    #[serde(default)]
    pub output: OutputSpec,
}

/// A validation problem tied to a config field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    /// Dotted path of the field.
    pub field: String,
    /// What is wrong.
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Why a document could not be turned into an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    /// Malformed TOML, unknown key or wrong type.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        /// 1-based line.
        line: usize,
        /// 1-based column.
        column: usize,
        /// Parser message.
        message: String,
    },
    /// Well-formed document with invalid contents.
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<FieldError>),
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// The source document (after any overrides).
    pub document: ConfigDocument,
    /// Transition schedule.
    pub schedule: TransitionSchedule,
    /// Initial law.
    pub mu0: Distribution,
    /// Windows.
    pub plan: WindowPlan,
    /// Generator.
    pub rng: RngId,
    /// Randomness sharing.
    pub mode: SamplingMode,
}

/// Parses and validates a TOML document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let document: ConfigDocument = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|span| line_col(text, span.start)).unwrap_or((1, 1));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    ExperimentConfig::from_document(document)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

struct Collector(Vec<FieldError>);

impl Collector {
    fn push(&mut self, field: impl Into<String>, message: impl fmt::Display) {
        self.0.push(FieldError {
            field: field.into(),
            message: message.to_string(),
        });
    }
}

fn build_matrix(spec: &MatrixSpec, states: usize, field: &str, errors: &mut Collector) -> Option<StochasticMatrix> {
    let entries = real_matrix(spec, states, field, errors)?;
    match StochasticMatrix::new(states, entries) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(field, e);
            None
        }
    }
}

fn real_matrix(spec: &MatrixSpec, states: usize, field: &str, errors: &mut Collector) -> Option<Vec<f64>> {
    if spec.len() != states {
        errors.push(field, format!("expected {states} rows, got {}", spec.len()));
        return None;
    }
    let mut entries = Vec::with_capacity(states * states);
    let mut ok = true;
    for (r, row) in spec.iter().enumerate() {
        if row.len() != states {
            errors.push(
                format!("{field}[{}]", r + 1),
                format!("expected {states} entries, got {}", row.len()),
            );
            ok = false;
            continue;
        }
        for (c, x) in row.iter().enumerate() {
            match x.value() {
                Ok(v) => entries.push(v),
                Err(msg) => {
                    errors.push(format!("{field}[{}][{}]", r + 1, c + 1), msg);
                    ok = false;
                }
            }
        }
    }
    ok.then_some(entries)
}

fn check_grid(grid: &[u64], field: &str, errors: &mut Collector) {
    if grid.is_empty() {
        errors.push(field, "must not be empty");
    } else if grid.windows(2).any(|w| w[1] <= w[0]) {
        errors.push(field, "n_grid not increasing");
    }
}

impl ExperimentConfig {
    /// Validates a document, collecting every error.
    pub fn from_document(document: ConfigDocument) -> Result<Self, ConfigError> {
        let mut errors = Collector(Vec::new());
        let doc = &document;

        if doc.schema_version != SCHEMA_VERSION {
            errors.push(
                "schema_version",
                format!(
                    "unsupported version {} (this build reads {SCHEMA_VERSION})",
                    doc.schema_version
                ),
            );
        }
        let states = doc.states;
        let states_ok = states >= 2;
        if !states_ok {
            errors.push("states", "a chain needs at least 2 states");
        }
        let rng = match doc.rng.parse::<RngId>() {
            Ok(r) => Some(r),
            Err(e) => {
                errors.push("rng", e);
                None
            }
        };
        if doc.seeds.is_empty() {
            errors.push("seeds", "at least one seed is required");
        }
        let mut sorted = doc.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            errors.push("seeds", "seeds must be distinct");
        }
        if doc.step_budget == 0 {
            errors.push("step_budget", "must be positive");
        }

        let mu0 = if !states_ok {
            None
        } else if doc.mu0.len() != states {
            errors.push("mu0", format!("expected {states} weights, got {}", doc.mu0.len()));
            None
        } else {
            let mut weights = Vec::with_capacity(states);
            for (i, w) in doc.mu0.iter().enumerate() {
                match w.value() {
                    Ok(v) => weights.push(v),
                    Err(msg) => errors.push(format!("mu0[{}]", i + 1), msg),
                }
            }
            if weights.len() == states {
                Distribution::new(weights).map_err(|e| errors.push("mu0", e)).ok()
            } else {
                None
            }
        };

        let schedule = if states_ok {
            build_schedule(&doc.schedule, states, &mut errors)
        } else {
            None
        };
        let plan = build_plan(&doc.window, &mut errors);

        let c = &doc.conditions;
        if !(c.epsilon.is_finite() && c.epsilon > 0.0) {
            errors.push("conditions.epsilon", "must be positive");
        }
        if c.cutoff == 0 {
            errors.push("conditions.cutoff", "must be at least 1");
        }
        if !(c.threshold.is_finite() && c.threshold > 0.0) {
            errors.push("conditions.threshold", "must be positive");
        }
        if let Some(grid) = &c.prefix_grid {
            check_grid(grid, "conditions.prefix_grid", &mut errors);
            if grid.first() == Some(&0) {
                errors.push("conditions.prefix_grid", "indices start at 1");
            }
        }
        let o = &doc.output;
        for (field, name) in [
            ("output.results", &o.results),
            ("output.conditions", &o.conditions),
            ("output.manifest", &o.manifest),
        ] {
            if name.is_empty() || name.contains(['/', '\\']) {
                errors.push(field, "must be a plain file name");
            }
        }

        match (errors.0.is_empty(), schedule, mu0, plan, rng) {
            (true, Some(schedule), Some(mu0), Some(plan), Some(rng)) => Ok(Self {
                mode: match doc.window.mode {
                    ModeSpec::Independent => SamplingMode::Independent,
                    ModeSpec::SingleTrajectory => SamplingMode::SingleTrajectory,
                },
                document,
                schedule,
                mu0,
                plan,
                rng,
            }),
            _ => Err(ConfigError::Validation(errors.0)),
        }
    }

    /// Canonical TOML text of the document.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.document).expect("config documents always serialize")
    }

    /// Re-validates after editing the document.
    pub fn with_document(&self, document: ConfigDocument) -> Result<Self, ConfigError> {
        Self::from_document(document)
    }
}

fn build_schedule(spec: &ScheduleSpec, states: usize, errors: &mut Collector) -> Option<TransitionSchedule> {
    match spec {
        ScheduleSpec::Constant { limit } => {
            build_matrix(limit, states, "schedule.limit", errors).map(TransitionSchedule::constant)
        }
        ScheduleSpec::Counterexample => {
            if states == 2 {
                Some(TransitionSchedule::counterexample())
            } else {
                errors.push("schedule.kind", "the counterexample schedule has exactly 2 states");
                None
            }
        }
        ScheduleSpec::Perturbed {
            limit,
            direction,
            decay,
        } => {
            let limit = build_matrix(limit, states, "schedule.limit", errors);
            let direction = real_matrix(direction, states, "schedule.direction", errors);
            let decay = match *decay {
                DecaySpec::Harmonic { scale } => Decay::Harmonic { scale },
                DecaySpec::Power { scale, exponent } => Decay::Power { scale, exponent },
                DecaySpec::Geometric { scale, ratio } => Decay::Geometric { scale, ratio },
            };
            let (limit, direction) = (limit?, direction?);
            TransitionSchedule::perturbed(limit, direction, decay)
                .map_err(|e| errors.push("schedule", e))
                .ok()
        }
        ScheduleSpec::Piecewise { limit, segments } => {
            let limit = build_matrix(limit, states, "schedule.limit", errors);
            let mut built = Vec::with_capacity(segments.len());
            for (idx, seg) in segments.iter().enumerate() {
                let field = format!("schedule.segments[{}].matrix", idx + 1);
                if let Some(matrix) = build_matrix(&seg.matrix, states, &field, errors) {
                    built.push(Segment {
                        start: seg.start,
                        end: seg.end,
                        matrix,
                    });
                }
            }
            if built.len() != segments.len() {
                return None;
            }
            TransitionSchedule::piecewise(built, limit?)
                .map_err(|e| errors.push("schedule.segments", e))
                .ok()
        }
    }
}

fn build_plan(spec: &WindowSpec, errors: &mut Collector) -> Option<WindowPlan> {
    let before = errors.0.len();
    check_grid(&spec.n_grid, "window.n_grid", errors);
    if let LengthSpec::Poly(alpha) = spec.length {
        if !(alpha.is_finite() && alpha > 0.0) {
            errors.push("window.length.poly", "exponent must be positive");
        }
    }
    if errors.0.len() > before {
        return None;
    }
    let offset = match &spec.offset {
        OffsetSpec::Zero => OffsetRule::Zero,
        OffsetSpec::Linear => OffsetRule::Linear,
        OffsetSpec::PowerOfTwo => OffsetRule::PowerOfTwo,
        OffsetSpec::Custom(list) => OffsetRule::Custom(list.clone()),
    };
    let length = match &spec.length {
        LengthSpec::Linear => LengthRule::Linear,
        LengthSpec::Poly(alpha) => LengthRule::Poly(*alpha),
        LengthSpec::Custom(list) => LengthRule::Custom(list.clone()),
    };
    WindowPlan::new(offset, length, spec.n_grid.clone())
        .map_err(|e| errors.push("window", e))
        .ok()
}

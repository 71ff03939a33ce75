//! Orchestration of condition checks and convergence runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nhmc::diagnostics::{
    cesaro_deviation, convergence_record, prefix_deviation_series, summability_partial_sums, windowed_deviation_series,
    ConditionReport, ConvergenceRecord, ConvergenceSetup, SamplingMode,
};
use nhmc::sim::DEFAULT_STEP_BUDGET;
use nhmc::{cesaro_stationary, entropy_rate, StationaryDistribution, StochasticMatrix, TransitionSchedule};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig, ResultsFormat};
use crate::output::{conditions_json, results_json, write_results_csv, Manifest, ManifestRef};
use crate::CliError;

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Replaces `seeds` with this single seed.
    pub seed: Option<u64>,
    /// Replaces `output.dir`.
    pub out_dir: Option<PathBuf>,
    /// Replaces `output.format`.
    pub format: Option<ResultsFormat>,
}

/// Applies overrides and re-validates, so the manifest echoes the effective config.
pub fn apply_overrides(config: &ExperimentConfig, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut doc = config.document.clone();
    if let Some(seed) = overrides.seed {
        doc.seeds = vec![seed];
    }
    if let Some(dir) = &overrides.out_dir {
        doc.output.dir = dir.to_string_lossy().into_owned();
    }
    if let Some(format) = overrides.format {
        doc.output.format = format;
    }
    config.with_document(doc)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(crate::parse_config(&text)?)
}

fn setup(config: &ExperimentConfig) -> ConvergenceSetup {
    ConvergenceSetup {
        schedule: config.schedule.clone(),
        mu0: config.mu0.clone(),
        plan: config.plan.clone(),
        seeds: config.document.seeds.clone(),
        rng: config.rng,
        step_budget: config.document.step_budget,
        mode: config.mode,
    }
}

/// Every enabled hypothesis check, in the order summability, windowed, prefix.
pub fn condition_reports(config: &ExperimentConfig) -> Result<Vec<ConditionReport>, CliError> {
    let c = &config.document.conditions;
    let mut reports = Vec::new();
    if c.summability {
        reports.push(summability_partial_sums(&config.plan, c.epsilon, c.cutoff)?);
    }
    let windows = config.plan.windows(config.document.step_budget)?;
    if c.windowed {
        reports.push(windowed_deviation_series(&config.schedule, &config.plan, c.threshold)?);
    }
    if c.prefix {
        let grid = match &c.prefix_grid {
            Some(grid) => grid.clone(),
            None => {
                let mut ends: Vec<u64> = windows.iter().map(|w| w.offset + w.length).collect();
                ends.sort_unstable();
                ends.dedup();
                ends
            }
        };
        if let Some(&last) = grid.last() {
            if last > config.document.step_budget {
                return Err(nhmc::Error::OverflowRisk {
                    end: u128::from(last),
                    budget: config.document.step_budget,
                }
                .into());
            }
        }
        reports.push(prefix_deviation_series(&config.schedule, &grid, c.threshold)?);
    }
    Ok(reports)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// One record per `(n, seed)`, sorted by `n` then by position in `seeds`.
/// Tasks run on up to `jobs` threads; the ordering does not depend on scheduling.
pub fn convergence_records(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<ConvergenceRecord>, CliError> {
    let setup = setup(config);
    let target = setup.target()?;
    let windows = setup.windows()?;
    let limit = setup.schedule.limit();

    let mut records = with_pool(jobs, || -> Result<Vec<ConvergenceRecord>, nhmc::Error> {
        let deviations: Vec<f64> = windows
            .par_iter()
            .map(|w| cesaro_deviation(&setup.schedule, w.offset, w.length).map(|d| d.max()))
            .collect::<Result<_, _>>()?;
        match setup.mode {
            SamplingMode::Independent => {
                let tasks: Vec<(usize, u64)> = (0..windows.len())
                    .flat_map(|i| setup.seeds.iter().map(move |&s| (i, s)))
                    .collect();
                tasks
                    .par_iter()
                    .map(|&(i, seed)| {
                        let sample = setup.sample(seed, windows[i])?;
                        convergence_record(&sample, seed, limit, &target, deviations[i])
                    })
                    .collect()
            }
            SamplingMode::SingleTrajectory => {
                let per_seed: Vec<Vec<ConvergenceRecord>> = setup
                    .seeds
                    .par_iter()
                    .map(|&seed| {
                        setup
                            .samples(seed)?
                            .iter()
                            .zip(&deviations)
                            .map(|(s, &d)| convergence_record(s, seed, limit, &target, d))
                            .collect()
                    })
                    .collect::<Result<_, _>>()?;
                Ok(per_seed.into_iter().flatten().collect())
            }
        }
    })?;
    // Stable: keeps seed order within each n.
    records.sort_by_key(|r| r.n);
    Ok(records)
}

/// Files written by a command.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Output directory.
    pub out_dir: PathBuf,
    /// Paths written, in write order.
    pub files: Vec<PathBuf>,
    /// Records of a `run` (empty for `check`).
    pub records: Vec<ConvergenceRecord>,
    /// Condition reports.
    pub reports: Vec<ConditionReport>,
}

fn write(path: PathBuf, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn prepare_dir(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&config.document.output.dir);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Full experiment: simulation, condition checks, and all three outputs.
/// Everything is computed before the first file is written.
pub fn run(config: &ExperimentConfig, jobs: Option<usize>) -> Result<RunSummary, CliError> {
    let reports = condition_reports(config)?;
    let records = convergence_records(config, jobs)?;

    let out = &config.document.output;
    let toml = config.to_toml();
    let outputs = BTreeMap::from([
        ("results".to_string(), out.results_file()),
        ("conditions".to_string(), out.conditions.clone()),
    ]);
    let manifest = Manifest::new("run", config.rng.as_str(), toml, outputs);
    let reference = ManifestRef {
        manifest: out.manifest.clone(),
        config_sha256: manifest.config_sha256.clone(),
    };

    let results = match out.format {
        ResultsFormat::Csv => {
            let mut buf = Vec::new();
            write_results_csv(&records, &reference, &mut buf).expect("writing to memory");
            buf
        }
        ResultsFormat::Json => results_json(&records, &reference).into_bytes(),
    };

    let dir = prepare_dir(config)?;
    let mut files = Vec::new();
    write(dir.join(out.results_file()), &results, &mut files)?;
    write(
        dir.join(&out.conditions),
        conditions_json(&reports, &reference).as_bytes(),
        &mut files,
    )?;
    write(dir.join(&out.manifest), manifest.to_json().as_bytes(), &mut files)?;
    Ok(RunSummary {
        out_dir: dir,
        files,
        records,
        reports,
    })
}

/// Condition checks only; writes the conditions JSON and a manifest.
pub fn check(config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let reports = condition_reports(config)?;
    let out = &config.document.output;
    let outputs = BTreeMap::from([("conditions".to_string(), out.conditions.clone())]);
    let manifest = Manifest::new("check", config.rng.as_str(), config.to_toml(), outputs);
    let reference = ManifestRef {
        manifest: out.manifest.clone(),
        config_sha256: manifest.config_sha256.clone(),
    };
    let dir = prepare_dir(config)?;
    let mut files = Vec::new();
    write(
        dir.join(&out.conditions),
        conditions_json(&reports, &reference).as_bytes(),
        &mut files,
    )?;
    write(dir.join(&out.manifest), manifest.to_json().as_bytes(), &mut files)?;
    Ok(RunSummary {
        out_dir: dir,
        files,
        records: Vec::new(),
        reports,
    })
}

/// One line of the built-in counterexample table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    /// Grid index.
    pub n: u64,
    /// Window offset `2^n`.
    pub a_n: u64,
    /// Window length `n`.
    pub phi_n: u64,
    /// Windowed deviation over steps `2^n + 1 ..= 2^n + n`.
    pub windowed: f64,
    /// Step at which the prefix deviation is taken (`2^n + n`).
    pub prefix_end: u64,
    /// Prefix deviation over steps `1 ..= 2^n + n`.
    pub prefix: f64,
}

/// Windowed vs prefix deviation of the counterexample schedule for `n = 1..=n_max`.
pub fn counterexample_table(n_max: u64) -> Result<Vec<CounterexampleRow>, CliError> {
    if n_max == 0 {
        return Err(CliError::Usage("--n-max must be at least 1".into()));
    }
    let end = u32::try_from(n_max)
        .ok()
        .and_then(|e| 2u64.checked_pow(e))
        .and_then(|a| a.checked_add(n_max));
    match end {
        Some(end) if end <= DEFAULT_STEP_BUDGET => {}
        _ => {
            return Err(nhmc::Error::OverflowRisk {
                end: end.map_or(u128::MAX, u128::from),
                budget: DEFAULT_STEP_BUDGET,
            }
            .into())
        }
    }
    let schedule = TransitionSchedule::counterexample();
    let ends: Vec<u64> = (1..=n_max).map(|n| (1u64 << n) + n).collect();
    let prefix = prefix_deviation_series(&schedule, &ends, nhmc::diagnostics::DEFAULT_DEVIATION_THRESHOLD)?;
    (1..=n_max)
        .zip(prefix.values)
        .map(|(n, prefix)| {
            let a_n = 1u64 << n;
            Ok(CounterexampleRow {
                n,
                a_n,
                phi_n: n,
                windowed: cesaro_deviation(&schedule, a_n, n)?.max(),
                prefix_end: a_n + n,
                prefix,
            })
        })
        .collect()
}

/// Output of `nhmc stationary`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    /// `π` from the linear solve.
    pub pi: Vec<f64>,
    /// `‖πP − π‖∞`.
    pub balance_residual: f64,
    /// Entropy rate in nats per step.
    pub entropy_rate_nats: f64,
    /// Entropy rate in bits per step.
    pub entropy_rate_bits: f64,
    /// Number of powers averaged in the cross-check.
    pub cesaro_m: u64,
    /// Cesàro-averaged rows.
    pub cesaro_rows: Vec<Vec<f64>>,
    /// Largest `|row_i(j) − π_j|`.
    pub cesaro_max_gap: f64,
}

/// Stationary law, entropy rate and the Cesàro cross-check of a matrix.
pub fn stationary_report(matrix: &StochasticMatrix, cesaro_m: u64) -> Result<StationaryReport, CliError> {
    let pi = StationaryDistribution::solve(matrix)?;
    let h = entropy_rate(matrix, &pi);
    let rows: Vec<Vec<f64>> = cesaro_stationary(matrix, cesaro_m)
        .into_iter()
        .map(|r| r.weights().to_vec())
        .collect();
    let gap = rows
        .iter()
        .flat_map(|r| r.iter().zip(pi.weights()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(StationaryReport {
        pi: pi.weights().to_vec(),
        balance_residual: pi.residual(),
        entropy_rate_nats: h,
        entropy_rate_bits: h / std::f64::consts::LN_2,
        cesaro_m,
        cesaro_rows: rows,
        cesaro_max_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_rows() {
        let rows = counterexample_table(20).unwrap();
        assert_eq!(rows.len(), 20);
        for r in &rows {
            assert!((r.windowed - 1.0 / 6.0).abs() < 1e-12);
        }
        // (n+1)(n+2)/2 sparse steps up to 2^n + n.
        let last = rows.last().unwrap();
        assert!((last.prefix - 231.0 / (6.0 * last.prefix_end as f64)).abs() < 1e-15);
        assert!(counterexample_table(0).is_err());
        assert!(matches!(
            counterexample_table(40),
            Err(CliError::Domain(nhmc::Error::OverflowRisk { .. }))
        ));
    }

    #[test]
    fn stationary_report_for_asymmetric_matrix() {
        let m = StochasticMatrix::from_rows(&[[0.9, 0.1], [0.2, 0.8]]).unwrap();
        let r = stationary_report(&m, 10_000).unwrap();
        assert!((r.pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.cesaro_max_gap < 1e-3);
        assert!((r.entropy_rate_bits * std::f64::consts::LN_2 - r.entropy_rate_nats).abs() < 1e-15);
    }
}

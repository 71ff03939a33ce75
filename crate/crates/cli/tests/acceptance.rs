//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 3-6, 9 and 10 are statistical with fixed seeds; the others are exact.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nhmc::chain::{enumerate_paths, log_joint, marginal_at};
use nhmc::diagnostics::{cesaro_deviation, prefix_deviation_series, ConvergenceRecord, ConvergenceSetup};
use nhmc::sim::{mix64, simulate_window, SimConfig};
use nhmc::stats::{entropy_density, residual_report, TransitionFamily};
use nhmc::{
    cesaro_stationary, entropy_rate, Distribution, RngId, Segment, StationaryDistribution, StochasticMatrix,
    TransitionSchedule,
};
use nhmc_cli::runner::{self, Overrides};
use nhmc_cli::ExperimentConfig;

const H_P1: f64 = 0.636514;
const STAT_TOL: f64 = 5e-3;
const MILLION: u64 = 1_000_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn preset(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("presets/{name}.toml"));
    runner::load_config(&path).expect("preset loads")
}

fn with(cfg: &ExperimentConfig, seeds: Vec<u64>, grid: Vec<u64>) -> ExperimentConfig {
    let mut doc = cfg.document.clone();
    doc.seeds = seeds;
    doc.window.n_grid = grid;
    cfg.with_document(doc).expect("valid override")
}

fn p1() -> StochasticMatrix {
    StochasticMatrix::from_rows(&[[1.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 3.0]]).unwrap()
}

/// Share of rows meeting `ok`, as (count, total).
fn share(rows: &[&ConvergenceRecord], ok: impl Fn(&ConvergenceRecord) -> bool) -> (usize, usize) {
    (rows.iter().filter(|r| ok(r)).count(), rows.len())
}

fn at_least_95(counts: (usize, usize)) -> bool {
    counts.1 > 0 && counts.0 * 100 >= 95 * counts.1
}

fn within_time(start: Instant, limit: Duration) -> (bool, String) {
    let elapsed = start.elapsed();
    (
        elapsed < limit,
        format!("{:.3}s < {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn windowed_counterexample() -> Outcome {
    let start = Instant::now();
    let s = TransitionSchedule::counterexample();
    let mut worst = 0.0f64;
    for n in 1..=20u64 {
        let d = cesaro_deviation(&s, 1 << n, n).unwrap();
        for &e in &d.entries {
            worst = worst.max((e - 1.0 / 6.0).abs());
        }
    }
    let (fast, t) = within_time(start, Duration::from_secs(1));
    outcome(
        worst <= 1e-12 && fast,
        format!("max |D - 1/6| = {worst:.2e} over n=1..20, every entry; {t}"),
    )
}

fn prefix_counterexample() -> Outcome {
    let start = Instant::now();
    let s = TransitionSchedule::counterexample();
    let grid: Vec<u64> = (1u64 << 16..=(1 << 20) + 20).collect();
    let report = prefix_deviation_series(&s, &grid, 1e-3).unwrap();
    let exact = 137.0 / (6.0 * 65536.0);
    let err = (report.values[0] - exact).abs();
    let max_tail = report.values.iter().copied().fold(0.0, f64::max);
    let (fast, t) = within_time(start, Duration::from_secs(5));
    outcome(
        err <= 1e-12 && max_tail < 1e-3 && fast,
        format!(
            "value at 65536 = {:.6e} (|err| = {err:.1e}); max over n in [2^16, 2^20+20] = {max_tail:.3e}; {t}",
            report.values[0]
        ),
    )
}

fn entropy_density_p1(records: &[&ConvergenceRecord], elapsed: Duration) -> Outcome {
    let counts = share(records, |r| (r.f - H_P1).abs() <= STAT_TOL);
    let fast = elapsed < Duration::from_secs(30);
    outcome(
        at_least_95(counts) && fast,
        format!(
            "{}/{} seeds with |f - 0.636514| <= 5e-3; {:.3}s < 30s",
            counts.0,
            counts.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn frequencies(records: &[&ConvergenceRecord]) -> (bool, String) {
    let c = share(records, |r| r.freq_err_max <= STAT_TOL && r.pair_err_max <= STAT_TOL);
    (
        at_least_95(c),
        format!("{}/{} seeds with state and pair errors <= 5e-3", c.0, c.1),
    )
}

fn perturbed() -> Outcome {
    let cfg = preset("perturbed");
    let cfg = with(&cfg, (1..=20).collect(), vec![MILLION]);
    let records = runner::convergence_records(&cfg, None).unwrap();
    let rows: Vec<&ConvergenceRecord> = records.iter().collect();
    let h_exact = entropy_rate(&p1(), &StationaryDistribution::solve(&p1()).unwrap());
    let f_ok = share(&rows, |r| (r.f - H_P1).abs() <= STAT_TOL);
    let (freq_pass, freq) = frequencies(&rows);
    outcome(
        at_least_95(f_ok) && freq_pass && (rows[0].entropy_rate - h_exact).abs() < 1e-15,
        format!("{}/{} seeds with |f - 0.636514| <= 5e-3; {freq}", f_ok.0, f_ok.1),
    )
}

fn log_transition_residual() -> Outcome {
    let cfg = with(&preset("p1_convergence"), (1..=20).collect(), vec![MILLION]);
    let setup = ConvergenceSetup {
        schedule: cfg.schedule.clone(),
        mu0: cfg.mu0.clone(),
        plan: cfg.plan.clone(),
        seeds: cfg.document.seeds.clone(),
        rng: cfg.rng,
        step_budget: cfg.document.step_budget,
        mode: cfg.mode,
    };
    let window = setup.windows().unwrap()[0];
    let residuals: Vec<f64> = setup
        .seeds
        .iter()
        .map(|&seed| {
            let sample = setup.sample(seed, window).unwrap();
            residual_report(&sample, &setup.schedule, TransitionFamily::LogTransition).residual
        })
        .collect();
    let ok = residuals.iter().filter(|r| r.abs() <= STAT_TOL).count();
    let worst = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
    outcome(
        ok * 100 >= 95 * residuals.len(),
        format!(
            "{ok}/{} seeds with |residual| <= 5e-3 (max {worst:.2e})",
            residuals.len()
        ),
    )
}

/// Uniform draws from a fixed SplitMix64 stream.
struct Stream(u64);

impl Stream {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(1);
        (mix64(self.0) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn below(&mut self, n: u64) -> u64 {
        (self.next() * n as f64) as u64
    }

    fn two_state(&mut self) -> StochasticMatrix {
        let (a, b) = (0.05 + 0.9 * self.next(), 0.05 + 0.9 * self.next());
        StochasticMatrix::from_rows(&[[a, 1.0 - a], [b, 1.0 - b]]).unwrap()
    }
}

fn exact_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = Stream(20_240_101);
    let (mut f_err, mut marg_err, mut sum_err) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..50u64 {
        let m = rng.below(13);
        let phi = 1 + rng.below(4);
        let segments = (1..=m + phi)
            .map(|k| Segment {
                start: k,
                end: k,
                matrix: rng.two_state(),
            })
            .collect();
        let schedule = TransitionSchedule::piecewise(segments, rng.two_state()).unwrap();
        let a = rng.next();
        let mu0 = Distribution::new(vec![a, 1.0 - a]).unwrap();

        let cfg = SimConfig::new(schedule.clone(), mu0.clone(), case, RngId::ChaCha8).unwrap();
        let sample = simulate_window(&cfg, m, phi).unwrap();
        let f = entropy_density(&sample).unwrap();
        let lj = log_joint(&schedule, &mu0, &sample.states, m).unwrap();
        f_err = f_err.max((f + lj / phi as f64).abs());

        // Brute-force marginal over every prefix path.
        let mut brute = [0.0; 2];
        for path in enumerate_paths(2, m as usize + 1) {
            let mut p = mu0.get(path[0]);
            for (i, w) in path.windows(2).enumerate() {
                p *= schedule.prob(i as u64 + 1, w[0], w[1]);
            }
            brute[path[m as usize]] += p;
        }
        let fast = marginal_at(&schedule, &mu0, m).unwrap();
        for (j, b) in brute.iter().enumerate() {
            marg_err = marg_err.max((fast.get(j) - b).abs());
        }

        let total: f64 = enumerate_paths(2, phi as usize + 1)
            .iter()
            .map(|p| log_joint(&schedule, &mu0, p, m).map_or(0.0, f64::exp))
            .sum();
        sum_err = sum_err.max((total - 1.0).abs());
    }
    let (fast, t) = within_time(start, Duration::from_secs(1));
    outcome(
        f_err <= 1e-12 && marg_err <= 1e-12 && sum_err <= 1e-10 && fast,
        format!("50 cases: density {f_err:.1e}, marginal {marg_err:.1e}, path sum {sum_err:.1e}; {t}"),
    )
}

type Case = (&'static str, [[f64; 2]; 2], [f64; 2]);

fn stationary_cross_check() -> Outcome {
    let cases: [Case; 4] = [
        ("P1", [[1.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 3.0]], [0.5, 0.5]),
        ("P2", [[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
        ("asym", [[0.9, 0.1], [0.2, 0.8]], [2.0 / 3.0, 1.0 / 3.0]),
        ("flip", [[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rows, target) in cases {
        let p = StochasticMatrix::from_rows(&rows).unwrap();
        let pi = StationaryDistribution::solve(&p).unwrap();
        let gap = cesaro_stationary(&p, 10_000)
            .iter()
            .flat_map(|r| {
                r.weights()
                    .iter()
                    .zip(pi.weights())
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        let target_err = pi
            .weights()
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pass &= gap <= 1e-3 && pi.residual() <= 1e-10 && target_err <= 1e-12;
        parts.push(format!("{name}: gap {gap:.1e}, residual {:.1e}", pi.residual()));
    }
    outcome(pass, parts.join("; "))
}

fn l1_trend() -> Outcome {
    let cfg = with(
        &preset("p1_convergence"),
        (1..=50).collect(),
        vec![10_000, 100_000, MILLION],
    );
    let records = runner::convergence_records(&cfg, None).unwrap();
    let means: Vec<f64> = [10_000, 100_000, MILLION]
        .iter()
        .map(|&n| {
            let rows: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.abs_err_f).collect();
            assert_eq!(rows.len(), 50);
            rows.iter().sum::<f64>() / rows.len() as f64
        })
        .collect();
    outcome(
        means.windows(2).all(|w| w[1] < w[0]),
        format!("mean |f - H| = {:.3e}, {:.3e}, {:.3e}", means[0], means[1], means[2]),
    )
}

fn h_hat_consistency(records: &[&ConvergenceRecord]) -> Outcome {
    let c = share(records, |r| (r.h_hat - H_P1).abs() <= STAT_TOL);
    outcome(
        at_least_95(c),
        format!("{}/{} seeds with |H_hat - 0.636514| <= 5e-3", c.0, c.1),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = runner::apply_overrides(
        &preset("p1_convergence"),
        &Overrides {
            out_dir: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        },
    )
    .unwrap();
    let csv = dir.path().join("results.csv");
    runner::run(&cfg, Some(1)).unwrap();
    let first = std::fs::read(&csv).unwrap();
    runner::run(&cfg, None).unwrap();
    let second = std::fs::read(&csv).unwrap();
    outcome(
        first == second && !first.is_empty(),
        format!("{} bytes, identical across runs with 1 and all threads", first.len()),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "windowed deviation of the counterexample", windowed_counterexample()));
    results.push((2, "prefix deviation of the counterexample", prefix_counterexample()));

    let start = Instant::now();
    let cfg = with(&preset("p1_convergence"), (1..=20).collect(), vec![MILLION]);
    let records = runner::convergence_records(&cfg, None).unwrap();
    let elapsed = start.elapsed();
    let rows: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.n == MILLION).collect();
    let h_ok = rows.iter().all(|r| (r.entropy_rate - H_P1).abs() < 1e-6);

    let mut c3 = entropy_density_p1(&rows, elapsed);
    c3.pass &= h_ok;
    results.push((3, "entropy density, constant P1, n = 10^6", c3));
    let (pass, detail) = frequencies(&rows);
    results.push((4, "state and pair frequencies, constant P1", outcome(pass, detail)));
    results.push((5, "perturbed schedule, n = 10^6", perturbed()));
    results.push((6, "compensated log-transition residual", log_transition_residual()));
    results.push((7, "exact oracle equivalence", exact_oracles()));
    results.push((8, "stationary solve vs Cesaro average", stationary_cross_check()));
    results.push((9, "seed-averaged |f - H| decreasing", l1_trend()));
    results.push((10, "plug-in entropy rate H_hat", h_hat_consistency(&rows)));
    results.push((11, "byte-identical CSV across runs", determinism()));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2}: {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

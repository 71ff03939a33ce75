//! Numerical checks of the convergence hypotheses and the convergence runner.
//!
//! Three conditions are examined on finite grids:
//!
//! * summability: `Σ_n exp(−ε φ(n)) < ∞`,
//! * windowed Cesàro: `(1/φ(n)) Σ_{k=a_n+1}^{a_n+φ(n)} |p_k(i,j) − p(i,j)| → 0`,
//! * prefix Cesàro: `(1/n) Σ_{k=1}^{n} |p_k(i,j) − p(i,j)| → 0`.
//!
//! None of these limits is decidable from finitely many terms. Verdicts are
//! heuristics over the supplied grid and say so.

use alloc::vec;
use alloc::vec::Vec;

use crate::sim::{simulate_grid_window, simulate_trajectory, SimConfig};
use crate::stats::{count_stats, entropy_density, h_hat};
use crate::window::Window;
use crate::{
    entropy_rate, Distribution, Error, Result, RngId, StationaryDistribution, StochasticMatrix, TransitionSchedule,
    WindowPlan, WindowSample,
};

/// Block-ratio ceiling for declaring the summability series convergent.
pub const SUMMABILITY_RATIO_THRESHOLD: f64 = 0.999;

/// Default ceiling on the tail deviation for the Cesàro conditions.
pub const DEFAULT_DEVIATION_THRESHOLD: f64 = 1e-3;

/// Which hypothesis a report is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum ConditionId {
    /// `Σ_n exp(−ε φ(n)) < ∞`.
    Summability,
    /// Delayed-window averages of `|p_k − p|` vanish.
    WindowedCesaro,
    /// Prefix averages of `|p_k − p|` vanish.
    PrefixCesaro,
}

/// Outcome of a finite-grid check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum Verdict {
    /// Consistent with the condition on the grid.
    SatisfiedOnGrid,
    /// The grid shows no progress toward the condition.
    ViolatedOnGrid,
    /// Neither.
    Inconclusive,
}

/// Values of one condition functional along a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionReport {
    /// Condition examined.
    pub condition: ConditionId,
    /// Evaluation indices.
    pub grid: Vec<u64>,
    /// Partial sums (summability) or max-over-entries deviations (Cesàro).
    pub values: Vec<f64>,
    /// Heuristic verdict.
    pub verdict: Verdict,
    /// `ε` (summability only).
    pub epsilon: Option<f64>,
    /// Block-ratio ceiling (summability) or deviation ceiling (Cesàro).
    pub threshold: f64,
    /// How the verdict was reached.
    pub method: &'static str,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(xs.iter().map(|x| libm::exp(x - max)).sum::<f64>())
}

/// Partial sums `S_N = Σ_{n=1}^{N} exp(−ε φ(n))` for `N = 1..=cutoff`.
///
/// The verdict groups terms into dyadic blocks `n ∈ [2^m, 2^{m+1})` and
/// compares consecutive block sums (in log space, so nothing underflows).
/// If every ratio over the later half of the complete blocks is at most
/// [`SUMMABILITY_RATIO_THRESHOLD`] the series is reported as satisfied;
/// otherwise the report is inconclusive.
pub fn summability_partial_sums(plan: &WindowPlan, epsilon: f64, cutoff: u64) -> Result<ConditionReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidPlan("epsilon must be positive"));
    }
    if cutoff == 0 {
        return Err(Error::InvalidPlan("summability cutoff must be at least 1"));
    }
    let length = plan.length_rule();
    let mut exponents = Vec::with_capacity(cutoff as usize);
    for n in 1..=cutoff {
        let phi = length.at(n).ok_or(Error::PlanIndexOutOfRange { n })?;
        exponents.push(-epsilon * phi as f64);
    }
    let mut values = Vec::with_capacity(exponents.len());
    let mut partial = 0.0;
    for &e in &exponents {
        partial += libm::exp(e);
        values.push(partial);
    }

    let mut block_logs = Vec::new();
    let mut lo = 1u64;
    while lo.checked_mul(2).is_some_and(|hi| hi - 1 <= cutoff) {
        let hi = lo * 2 - 1;
        block_logs.push(log_sum_exp(&exponents[(lo - 1) as usize..hi as usize]));
        lo *= 2;
    }
    let verdict = if block_logs.len() < 3 {
        Verdict::Inconclusive
    } else {
        let ratios: Vec<f64> = block_logs.windows(2).map(|w| w[1] - w[0]).collect();
        let tail = &ratios[ratios.len() / 2..];
        let ceiling = libm::log(SUMMABILITY_RATIO_THRESHOLD);
        // Both blocks below the smallest representable term: treat as converged.
        if tail.iter().all(|&r| r <= ceiling || r.is_nan()) {
            Verdict::SatisfiedOnGrid
        } else {
            Verdict::Inconclusive
        }
    };

    Ok(ConditionReport {
        condition: ConditionId::Summability,
        grid: (1..=cutoff).collect(),
        values,
        verdict,
        epsilon: Some(epsilon),
        threshold: SUMMABILITY_RATIO_THRESHOLD,
        method: "dyadic block-sum ratio test over the later half of complete blocks (heuristic)",
    })
}

/// Per-entry deviations `(1/φ) Σ_{k=a+1}^{a+φ} |p_k(i,j) − p(i,j)|`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DeviationMatrix {
    /// Number of states.
    pub size: usize,
    /// Row-major deviations.
    pub entries: Vec<f64>,
}

impl DeviationMatrix {
    /// Largest entry.
    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }
}

/// Delayed-window deviation of the schedule from its limit matrix,
/// over steps `offset+1 ..= offset+length`. `O(length · b²)`.
pub fn cesaro_deviation(schedule: &TransitionSchedule, offset: u64, length: u64) -> Result<DeviationMatrix> {
    if length == 0 {
        return Err(Error::EmptyWindow { n: 0 });
    }
    let b = schedule.size();
    let limit = schedule.limit();
    let mut acc = vec![0.0; b * b];
    for step in 1..=length {
        let k = offset.checked_add(step).ok_or(Error::OverflowRisk {
            end: u128::from(offset) + u128::from(length),
            budget: u64::MAX,
        })?;
        for (idx, a) in acc.iter_mut().enumerate() {
            let (i, j) = (idx / b, idx % b);
            *a += libm::fabs(schedule.prob(k, i, j) - limit.get(i, j));
        }
    }
    let phi = length as f64;
    Ok(DeviationMatrix {
        size: b,
        entries: acc.into_iter().map(|a| a / phi).collect(),
    })
}

/// Tail verdict for a deviation series.
///
/// Over the later half of the grid: satisfied when the values never increase
/// and the last one is at most `threshold`; violated when the last value is
/// above `threshold` and no lower than the first tail value (up to a relative
/// `1e-9`, so a flat series does not flip on rounding).
pub fn deviation_verdict(values: &[f64], threshold: f64) -> Verdict {
    let Some(&last) = values.last() else {
        return Verdict::Inconclusive;
    };
    let tail = &values[values.len() / 2..];
    let nonincreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    if nonincreasing && last <= threshold {
        Verdict::SatisfiedOnGrid
    } else if last > threshold && last >= tail[0] * (1.0 - 1e-9) {
        Verdict::ViolatedOnGrid
    } else {
        Verdict::Inconclusive
    }
}

/// Max-over-entries windowed deviation `D_n` at every grid window of the plan.
pub fn windowed_deviation_series(
    schedule: &TransitionSchedule,
    plan: &WindowPlan,
    threshold: f64,
) -> Result<ConditionReport> {
    let mut values = Vec::with_capacity(plan.grid().len());
    for &n in plan.grid() {
        let w = plan.window(n)?;
        values.push(cesaro_deviation(schedule, w.offset, w.length)?.max());
    }
    Ok(ConditionReport {
        condition: ConditionId::WindowedCesaro,
        grid: plan.grid().to_vec(),
        verdict: deviation_verdict(&values, threshold),
        values,
        epsilon: None,
        threshold,
        method: "later-half grid values nonincreasing and final value below threshold (heuristic)",
    })
}

/// `max_{i,j} (1/n) Σ_{k=1}^{n} |p_k(i,j) − p(i,j)|` at each grid point,
/// accumulated in one pass up to the largest grid value.
pub fn prefix_deviation_series(schedule: &TransitionSchedule, grid: &[u64], threshold: f64) -> Result<ConditionReport> {
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::InvalidPlan("prefix grid must be nonempty and start at n >= 1"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidPlan("n_grid not increasing"));
    }
    let b = schedule.size();
    let limit = schedule.limit();
    let mut acc = vec![0.0; b * b];
    let mut values = Vec::with_capacity(grid.len());
    let mut k = 0u64;
    for &n in grid {
        while k < n {
            k += 1;
            for (idx, a) in acc.iter_mut().enumerate() {
                let (i, j) = (idx / b, idx % b);
                *a += libm::fabs(schedule.prob(k, i, j) - limit.get(i, j));
            }
        }
        values.push(acc.iter().copied().fold(0.0, f64::max) / n as f64);
    }
    Ok(ConditionReport {
        condition: ConditionId::PrefixCesaro,
        grid: grid.to_vec(),
        verdict: deviation_verdict(&values, threshold),
        values,
        epsilon: None,
        threshold,
        method: "later-half grid values nonincreasing and final value below threshold (heuristic)",
    })
}

/// How grid windows share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "snake_case"))]
pub enum SamplingMode {
    /// Each grid window from its own derived seed.
    #[default]
    Independent,
    /// All grid windows cut from one trajectory per seed.
    SingleTrajectory,
}

/// `π` and `H` of a schedule's limit matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LimitTarget {
    /// Stationary law of the limit matrix.
    pub stationary: StationaryDistribution,
    /// Entropy rate of the limit matrix, nats per step.
    pub entropy_rate: f64,
}

impl LimitTarget {
    /// Fails with [`Error::NotIrreducible`] for reducible limits.
    pub fn of(limit: &StochasticMatrix) -> Result<Self> {
        let stationary = StationaryDistribution::solve(limit)?;
        let entropy_rate = entropy_rate(limit, &stationary);
        Ok(Self {
            stationary,
            entropy_rate,
        })
    }
}

/// Errors of one window against the limit quantities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConvergenceRecord {
    /// Grid index.
    pub n: u64,
    /// `a_n`.
    pub a_n: u64,
    /// `φ(n)`.
    pub phi_n: u64,
    /// Master seed.
    pub seed: u64,
    /// Entropy density `f`.
    pub f: f64,
    /// Entropy rate `H` of the limit matrix.
    #[cfg_attr(feature = "serde", serde(rename = "H"))]
    pub entropy_rate: f64,
    /// `|f − H|`.
    pub abs_err_f: f64,
    /// `max_i |S(i)/φ − π_i|`.
    pub freq_err_max: f64,
    /// `max_{i,j} |S(i,j)/φ − π_i p(i,j)|`.
    pub pair_err_max: f64,
    /// Plug-in estimate `Ĥ`.
    pub h_hat: f64,
    /// `|Ĥ − H|`.
    pub abs_err_hhat: f64,
    /// Windowed deviation `D_n` (max over entries).
    #[cfg_attr(feature = "serde", serde(rename = "D_n"))]
    pub windowed_deviation: f64,
}

/// One window's record.
pub fn convergence_record(
    sample: &WindowSample,
    master_seed: u64,
    limit: &StochasticMatrix,
    target: &LimitTarget,
    windowed_deviation: f64,
) -> Result<ConvergenceRecord> {
    let counts = count_stats(sample);
    let f = entropy_density(sample)?;
    let estimate = h_hat(&counts);
    let phi = sample.length as f64;
    let pi = target.stationary.weights();
    let b = sample.size;
    let freq_err_max = counts
        .state_counts
        .iter()
        .zip(pi)
        .map(|(&s, &p)| libm::fabs(s as f64 / phi - p))
        .fold(0.0, f64::max);
    let pair_err_max = (0..b * b)
        .map(|idx| {
            let (i, j) = (idx / b, idx % b);
            libm::fabs(counts.pair_counts[idx] as f64 / phi - pi[i] * limit.get(i, j))
        })
        .fold(0.0, f64::max);
    let h = target.entropy_rate;
    Ok(ConvergenceRecord {
        n: sample.n,
        a_n: sample.offset,
        phi_n: sample.length,
        seed: master_seed,
        f,
        entropy_rate: h,
        abs_err_f: libm::fabs(f - h),
        freq_err_max,
        pair_err_max,
        h_hat: estimate,
        abs_err_hhat: libm::fabs(estimate - h),
        windowed_deviation,
    })
}

/// A full convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    /// Transition schedule; its limit supplies `π` and `H`.
    pub schedule: TransitionSchedule,
    /// Initial law.
    pub mu0: Distribution,
    /// Windows.
    pub plan: WindowPlan,
    /// Master seeds, one replication each.
    pub seeds: Vec<u64>,
    /// Generator.
    pub rng: RngId,
    /// Cap on `a_n + φ(n)`.
    pub step_budget: u64,
    /// How windows share randomness.
    pub mode: SamplingMode,
}

impl ConvergenceSetup {
    /// Grid windows, budget-checked.
    pub fn windows(&self) -> Result<Vec<Window>> {
        self.plan.windows(self.step_budget)
    }

    /// `π` and `H` of the limit matrix.
    pub fn target(&self) -> Result<LimitTarget> {
        LimitTarget::of(self.schedule.limit())
    }

    /// `D_n` for every grid window.
    pub fn windowed_deviations(&self) -> Result<Vec<f64>> {
        self.windows()?
            .iter()
            .map(|w| cesaro_deviation(&self.schedule, w.offset, w.length).map(|d| d.max()))
            .collect()
    }

    fn sim(&self, seed: u64) -> Result<SimConfig> {
        SimConfig::new(self.schedule.clone(), self.mu0.clone(), seed, self.rng)
    }

    /// Every grid window for one master seed, honoring the sampling mode.
    pub fn samples(&self, seed: u64) -> Result<Vec<WindowSample>> {
        let cfg = self.sim(seed)?;
        match self.mode {
            SamplingMode::Independent => self
                .windows()?
                .into_iter()
                .map(|w| simulate_grid_window(&cfg, w))
                .collect(),
            SamplingMode::SingleTrajectory => simulate_trajectory(&cfg, &self.plan, self.step_budget),
        }
    }

    /// One grid window for one master seed (independent mode only).
    pub fn sample(&self, seed: u64, window: Window) -> Result<WindowSample> {
        simulate_grid_window(&self.sim(seed)?, window)
    }
}

/// One record per `(n, seed)`, sorted by `n` then by position in `seeds`.
pub fn convergence_series(setup: &ConvergenceSetup) -> Result<Vec<ConvergenceRecord>> {
    let target = setup.target()?;
    let deviations = setup.windowed_deviations()?;
    let limit = setup.schedule.limit();
    let mut per_seed = Vec::with_capacity(setup.seeds.len());
    for &seed in &setup.seeds {
        per_seed.push(setup.samples(seed)?);
    }
    let mut records = Vec::with_capacity(deviations.len() * setup.seeds.len());
    for (idx, &dev) in deviations.iter().enumerate() {
        for (samples, &seed) in per_seed.iter().zip(&setup.seeds) {
            records.push(convergence_record(&samples[idx], seed, limit, &target, dev)?);
        }
    }
    Ok(records)
}

//! Delayed-window statistics: occupation counts, entropy density, the
//! plug-in entropy-rate estimate, and compensated delayed sums.

use alloc::vec;
use alloc::vec::Vec;

use crate::{xlogx, Error, Result, TransitionSchedule, WindowSample};

/// State and pair counts over one window.
///
/// `state_counts[j]` counts `j` among the first `φ(n)` window states
/// `ξ_{a_n}, …, ξ_{a_n+φ(n)-1}`; `pair_counts[i·b + j]` counts `(i, j)` among
/// the `φ(n)` transitions. With this convention `Σ_j S(i, j) = S(i)` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WindowCounts {
    /// Grid index.
    pub n: u64,
    /// Offset `a_n`.
    pub offset: u64,
    /// Length `φ(n)`.
    pub length: u64,
    /// Number of states `b`.
    pub size: usize,
    /// `S(j)`.
    pub state_counts: Vec<u64>,
    /// `S(i, j)`, row-major.
    pub pair_counts: Vec<u64>,
    /// Seed of the sample.
    pub seed: u64,
}

impl WindowCounts {
    /// `S(i, j)`.
    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> u64 {
        self.pair_counts[i * self.size + j]
    }

    /// Multiplies every count and the length by `factor`, as if the window
    /// were observed `factor` times.
    pub fn replicated(&self, factor: u64) -> Self {
        Self {
            length: self.length * factor,
            state_counts: self.state_counts.iter().map(|c| c * factor).collect(),
            pair_counts: self.pair_counts.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// Adds the counts of another window over the same states.
    pub fn merge(&mut self, other: &WindowCounts) -> Result<()> {
        if other.size != self.size {
            return Err(Error::SizeMismatch {
                expected: self.size,
                actual: other.size,
            });
        }
        self.length += other.length;
        for (a, b) in self.state_counts.iter_mut().zip(&other.state_counts) {
            *a += b;
        }
        for (a, b) in self.pair_counts.iter_mut().zip(&other.pair_counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Counts plus the two entropy functionals of a window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DelayedWindowStats {
    /// Occupation counts.
    pub counts: WindowCounts,
    /// Generalized entropy density `f` in nats per step.
    pub entropy_density: f64,
    /// Plug-in entropy-rate estimate `Ĥ` in nats per step.
    pub h_hat: f64,
    /// States never visited among the first `φ(n)` window states; their rows
    /// contribute nothing to `Ĥ`.
    pub unvisited_states: usize,
}

impl DelayedWindowStats {
    /// All statistics of a sample.
    pub fn from_sample(sample: &WindowSample) -> Result<Self> {
        let counts = count_stats(sample);
        let entropy_density = entropy_density(sample)?;
        let unvisited_states = counts.state_counts.iter().filter(|&&c| c == 0).count();
        Ok(Self {
            h_hat: h_hat(&counts),
            counts,
            entropy_density,
            unvisited_states,
        })
    }
}

/// Exact state and pair counts of a window.
pub fn count_stats(sample: &WindowSample) -> WindowCounts {
    let b = sample.size;
    let mut state_counts = vec![0u64; b];
    let mut pair_counts = vec![0u64; b * b];
    for pair in sample.states.windows(2) {
        state_counts[pair[0]] += 1;
        pair_counts[pair[0] * b + pair[1]] += 1;
    }
    WindowCounts {
        n: sample.n,
        offset: sample.offset,
        length: sample.length,
        size: b,
        state_counts,
        pair_counts,
        seed: sample.seed,
    }
}

/// `f = −(log μ_{a_n}(ξ_{a_n}) + Σ_k log p_k(ξ_{k−1}, ξ_k)) / φ(n)`.
pub fn entropy_density(sample: &WindowSample) -> Result<f64> {
    if !sample.log_mu_start.is_finite() || sample.step_logps.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if sample.length == 0 {
        return Err(Error::EmptyWindow { n: sample.n });
    }
    let total = sample.log_mu_start + sample.step_logps.iter().sum::<f64>();
    Ok(-total / sample.length as f64)
}

/// `Ĥ = −Σ_i (S(i)/φ) Σ_j (S(i,j)/S(i)) log(S(i,j)/S(i))`.
///
/// Rows with `S(i) = 0` carry no information and are skipped; empty pairs
/// contribute `0`. The result lies in `[0, log b]` and is unchanged when every
/// count is multiplied by the same positive integer.
pub fn h_hat(counts: &WindowCounts) -> f64 {
    if counts.length == 0 {
        return 0.0;
    }
    let phi = counts.length as f64;
    let b = counts.size;
    let mut h = 0.0;
    for (i, &si) in counts.state_counts.iter().enumerate() {
        if si == 0 {
            continue;
        }
        let weight = si as f64 / phi;
        let row: f64 = counts.pair_counts[i * b..(i + 1) * b]
            .iter()
            .map(|&sij| xlogx(sij as f64 / si as f64))
            .sum();
        h -= weight * row;
    }
    h.max(0.0)
}

/// A function `g_k(x, y)` of a transition, for compensated delayed sums.
pub trait TransitionFunction {
    /// `g_k(x, y)`.
    fn value(&self, schedule: &TransitionSchedule, k: u64, x: usize, y: usize) -> f64;

    /// `E[g_k(x, ξ_k) | ξ_{k−1} = x] = Σ_j g_k(x, j) p_k(x, j)`.
    fn conditional_mean(&self, schedule: &TransitionSchedule, k: u64, x: usize) -> f64 {
        (0..schedule.size())
            .map(|j| {
                let p = schedule.prob(k, x, j);
                if p > 0.0 {
                    self.value(schedule, k, x, j) * p
                } else {
                    0.0
                }
            })
            .sum()
    }
}

impl<F: Fn(u64, usize, usize) -> f64> TransitionFunction for F {
    fn value(&self, _: &TransitionSchedule, k: u64, x: usize, y: usize) -> f64 {
        self(k, x, y)
    }
}

/// The built-in transition functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum TransitionFamily {
    /// `1{y = j}`.
    StateIndicator(usize),
    /// `1{x = i} · 1{y = j}`.
    PairIndicator(usize, usize),
    /// `log p_k(x, y)`; its conditional mean is `Σ_j p log p` with `0 log 0 = 0`.
    LogTransition,
}

impl TransitionFunction for TransitionFamily {
    fn value(&self, schedule: &TransitionSchedule, k: u64, x: usize, y: usize) -> f64 {
        match *self {
            TransitionFamily::StateIndicator(j) => f64::from(u8::from(y == j)),
            TransitionFamily::PairIndicator(i, j) => f64::from(u8::from(x == i && y == j)),
            TransitionFamily::LogTransition => libm::log(schedule.prob(k, x, y)),
        }
    }

    fn conditional_mean(&self, schedule: &TransitionSchedule, k: u64, x: usize) -> f64 {
        match *self {
            TransitionFamily::StateIndicator(j) => schedule.prob(k, x, j),
            TransitionFamily::PairIndicator(i, j) => {
                if x == i {
                    schedule.prob(k, i, j)
                } else {
                    0.0
                }
            }
            TransitionFamily::LogTransition => (0..schedule.size()).map(|j| xlogx(schedule.prob(k, x, j))).sum(),
        }
    }
}

/// Compensated delayed sum of a built-in family.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ResidualReport {
    /// Which function was summed.
    pub family: TransitionFamily,
    /// `(1/φ) Σ_k {g_k(ξ_{k−1}, ξ_k) − E[g_k(ξ_{k−1}, ·) | ξ_{k−1}]}`.
    pub residual: f64,
}

/// `(1/φ) Σ_{k=a+1}^{a+φ} {g_k(ξ_{k−1}, ξ_k) − Σ_j g_k(ξ_{k−1}, j) p_k(ξ_{k−1}, j)}`
/// over the sample window. This tends to `0` as `φ → ∞` for bounded `g`
/// and for `log p_k` whenever `Σ_n exp(−ε φ(n)) < ∞` for every `ε > 0`.
pub fn delayed_residual<G: TransitionFunction + ?Sized>(
    sample: &WindowSample,
    schedule: &TransitionSchedule,
    g: &G,
) -> f64 {
    let mut total = 0.0;
    for (step, pair) in sample.states.windows(2).enumerate() {
        let k = sample.offset + step as u64 + 1;
        total += g.value(schedule, k, pair[0], pair[1]) - g.conditional_mean(schedule, k, pair[0]);
    }
    total / sample.length as f64
}

/// [`delayed_residual`] for a built-in family.
pub fn residual_report(
    sample: &WindowSample,
    schedule: &TransitionSchedule,
    family: TransitionFamily,
) -> ResidualReport {
    ResidualReport {
        family,
        residual: delayed_residual(sample, schedule, &family),
    }
}

/// Gaps between empirical frequencies and their compensators:
/// `S(j)/φ − (1/φ) Σ_k p_k(ξ_{k−1}, j)` per state, and
/// `S(i,j)/φ − (1/φ) Σ_k 1{ξ_{k−1} = i} p_k(i, j)` per pair (row-major).
pub fn compensator_gaps(
    sample: &WindowSample,
    counts: &WindowCounts,
    schedule: &TransitionSchedule,
) -> (Vec<f64>, Vec<f64>) {
    let b = sample.size;
    let phi = sample.length as f64;
    let mut state_comp = vec![0.0; b];
    let mut pair_comp = vec![0.0; b * b];
    for (step, &x) in sample.states[..sample.states.len() - 1].iter().enumerate() {
        let k = sample.offset + step as u64 + 1;
        for j in 0..b {
            let p = schedule.prob(k, x, j);
            state_comp[j] += p;
            pair_comp[x * b + j] += p;
        }
    }
    let states = counts
        .state_counts
        .iter()
        .zip(&state_comp)
        .map(|(&s, &c)| (s as f64 - c) / phi)
        .collect();
    let pairs = counts
        .pair_counts
        .iter()
        .zip(&pair_comp)
        .map(|(&s, &c)| (s as f64 - c) / phi)
        .collect();
    (states, pairs)
}

/// Checks, for every state `j`, the boundary identity
/// `S(j) + 1{ξ_{a+φ} = j} − 1{ξ_a = j} = Σ_{k=a+1}^{a+φ} 1{ξ_k = j}`,
/// which ties the count convention to the transition-indexed sums.
pub fn boundary_identity_check(sample: &WindowSample, counts: &WindowCounts) -> bool {
    let (Some(&first), Some(&last)) = (sample.states.first(), sample.states.last()) else {
        return false;
    };
    (0..sample.size).all(|j| {
        let lhs = counts.state_counts[j] as i64 + i64::from(last == j) - i64::from(first == j);
        let rhs = sample.states[1..].iter().filter(|&&s| s == j).count() as i64;
        lhs == rhs
    })
}

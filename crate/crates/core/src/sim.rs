//! Seeded, streaming simulation of chain windows.
//!
//! A window `ξ_a, …, ξ_{a+φ}` is produced by running the chain from `ξ_0`,
//! discarding states before `a`. The marginal `μ_a` is propagated exactly
//! alongside, so the sample carries `log μ_a(ξ_a)` without replications.
//! Memory is `O(b + φ)` regardless of `a`.
//!
//! Each next state is drawn by inverse CDF: one uniform `u ∈ [0, 1)` is
//! compared against the running row sum `p_k(i, 0) + … + p_k(i, j)`.
//! Uniforms are `(x >> 11) · 2⁻⁵³` for the generator's next 64-bit output `x`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_core::{RngCore, SeedableRng};

use crate::chain::propagate;
use crate::window::Window;
use crate::{Distribution, Error, Result, TransitionSchedule, WindowPlan};

/// Default cap on `a_n + φ(n)`.
pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

/// Supported pseudorandom generators, each seeded with `SeedableRng::seed_from_u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum RngId {
    /// ChaCha with 8 rounds (`"chacha8"`).
    #[default]
    ChaCha8,
    /// ChaCha with 20 rounds (`"chacha20"`).
    ChaCha20,
}

impl RngId {
    /// All identifiers.
    pub const ALL: [RngId; 2] = [RngId::ChaCha8, RngId::ChaCha20];

    /// Stable identifier used in configs and manifests.
    pub fn as_str(self) -> &'static str {
        match self {
            RngId::ChaCha8 => "chacha8",
            RngId::ChaCha20 => "chacha20",
        }
    }
}

impl fmt::Display for RngId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unknown generator identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRng;

impl fmt::Display for UnknownRng {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown rng id (expected \"chacha8\" or \"chacha20\")")
    }
}

impl FromStr for RngId {
    type Err = UnknownRng;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        RngId::ALL.into_iter().find(|r| r.as_str() == s).ok_or(UnknownRng)
    }
}

enum Generator {
    ChaCha8(ChaCha8Rng),
    ChaCha20(ChaCha20Rng),
}

impl Generator {
    fn new(id: RngId, seed: u64) -> Self {
        match id {
            RngId::ChaCha8 => Generator::ChaCha8(ChaCha8Rng::seed_from_u64(seed)),
            RngId::ChaCha20 => Generator::ChaCha20(ChaCha20Rng::seed_from_u64(seed)),
        }
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        let x = match self {
            Generator::ChaCha8(r) => r.next_u64(),
            Generator::ChaCha20(r) => r.next_u64(),
        };
        (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-window seed for grid index `n`:
/// `mix64(master + 0x9E3779B97F4A7C15 · (n + 1))` (wrapping arithmetic).
pub fn derive_seed(master: u64, n: u64) -> u64 {
    mix64(master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(n.wrapping_add(1))))
}

/// Everything needed to reproduce a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    schedule: TransitionSchedule,
    mu0: Distribution,
    seed: u64,
    rng: RngId,
}

impl SimConfig {
    /// Checks that `mu0` and `schedule` have the same number of states.
    pub fn new(schedule: TransitionSchedule, mu0: Distribution, seed: u64, rng: RngId) -> Result<Self> {
        if schedule.size() != mu0.size() {
            return Err(Error::SizeMismatch {
                expected: schedule.size(),
                actual: mu0.size(),
            });
        }
        Ok(Self {
            schedule,
            mu0,
            seed,
            rng,
        })
    }

    /// Same configuration, different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Schedule.
    pub fn schedule(&self) -> &TransitionSchedule {
        &self.schedule
    }

    /// Initial law.
    pub fn mu0(&self) -> &Distribution {
        &self.mu0
    }

    /// Seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator.
    pub fn rng(&self) -> RngId {
        self.rng
    }
}

/// Raw material of one delayed window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WindowSample {
    /// Grid index (0 for windows simulated outside a plan).
    pub n: u64,
    /// Offset `a_n`.
    pub offset: u64,
    /// Length `φ(n)`.
    pub length: u64,
    /// Number of states `b`.
    pub size: usize,
    /// `ξ_{a_n}, …, ξ_{a_n+φ(n)}`, 0-based; `φ(n) + 1` entries.
    pub states: Vec<usize>,
    /// `log μ_{a_n}(ξ_{a_n})`.
    pub log_mu_start: f64,
    /// `log p_k(ξ_{k-1}, ξ_k)` for `k = a_n+1 ..= a_n+φ(n)`.
    pub step_logps: Vec<f64>,
    /// Seed the generator was started from.
    pub seed: u64,
}

struct Walker<'a> {
    schedule: &'a TransitionSchedule,
    rng: Generator,
}

impl<'a> Walker<'a> {
    fn new(cfg: &'a SimConfig, seed: u64) -> Self {
        Self {
            schedule: &cfg.schedule,
            rng: Generator::new(cfg.rng, seed),
        }
    }

    fn initial(&mut self, mu0: &Distribution) -> usize {
        let u = self.rng.uniform();
        inverse_cdf(mu0.weights().iter().copied(), u)
    }

    /// Draws `ξ_k` given `ξ_{k-1} = from`; returns the state and its probability.
    #[inline]
    fn step(&mut self, k: u64, from: usize) -> (usize, f64) {
        let u = self.rng.uniform();
        let b = self.schedule.size();
        let to = inverse_cdf((0..b).map(|j| self.schedule.prob(k, from, j)), u);
        (to, self.schedule.prob(k, from, to))
    }
}

/// First index whose cumulative weight exceeds `u`; falls back to the last
/// positive-weight index when rounding leaves the total just below `u`.
fn inverse_cdf(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (j, w) in weights.enumerate() {
        if w > 0.0 {
            cum += w;
            last_positive = j;
            if u < cum {
                return j;
            }
        }
    }
    last_positive
}

/// Simulates `ξ_0, …, ξ_{offset+length}` from `cfg.seed()` and keeps the window
/// `ξ_offset, …, ξ_{offset+length}`.
pub fn simulate_window(cfg: &SimConfig, offset: u64, length: u64) -> Result<WindowSample> {
    simulate_window_seeded(cfg, offset, length, cfg.seed)
}

fn simulate_window_seeded(cfg: &SimConfig, offset: u64, length: u64, seed: u64) -> Result<WindowSample> {
    if length == 0 {
        return Err(Error::EmptyWindow { n: 0 });
    }
    let b = cfg.schedule.size();
    let mut walker = Walker::new(cfg, seed);
    let mut mu = cfg.mu0.weights().to_vec();
    let mut scratch = vec![0.0; b];

    let mut state = walker.initial(&cfg.mu0);
    for k in 1..=offset {
        state = walker.step(k, state).0;
        propagate(&cfg.schedule, k, &mut mu, &mut scratch);
    }

    let len = usize::try_from(length).map_err(|_| Error::OverflowRisk {
        end: u128::from(offset) + u128::from(length),
        budget: u64::MAX,
    })?;
    let mut states = Vec::with_capacity(len + 1);
    let mut step_logps = Vec::with_capacity(len);
    states.push(state);
    for k in offset + 1..=offset + length {
        let (next, p) = walker.step(k, state);
        step_logps.push(libm::log(p));
        states.push(next);
        state = next;
    }

    Ok(WindowSample {
        n: 0,
        offset,
        length,
        size: b,
        log_mu_start: libm::log(mu[states[0]]),
        states,
        step_logps,
        seed,
    })
}

/// One independently seeded window per grid point, in grid order.
///
/// The window for `n` uses seed [`derive_seed`]`(cfg.seed(), n)`, so any
/// single grid point can be reproduced on its own. Items past the step
/// budget are reported as [`Error::OverflowRisk`] without simulating.
pub fn simulate_window_series<'a>(
    cfg: &'a SimConfig,
    plan: &'a WindowPlan,
    step_budget: u64,
) -> impl Iterator<Item = Result<WindowSample>> + 'a {
    plan.grid().iter().map(move |&n| {
        let window = plan.window(n)?;
        if window.end() > u128::from(step_budget) {
            return Err(Error::OverflowRisk {
                end: window.end(),
                budget: step_budget,
            });
        }
        simulate_grid_window(cfg, window)
    })
}

/// The window of [`simulate_window_series`] at one grid point.
pub fn simulate_grid_window(cfg: &SimConfig, window: Window) -> Result<WindowSample> {
    let seed = derive_seed(cfg.seed, window.n);
    let mut sample = simulate_window_seeded(cfg, window.offset, window.length, seed)?;
    sample.n = window.n;
    Ok(sample)
}

/// Every grid window cut from a single trajectory started from `cfg.seed()`.
///
/// Windows may overlap; each keeps its own copy of its states.
pub fn simulate_trajectory(cfg: &SimConfig, plan: &WindowPlan, step_budget: u64) -> Result<Vec<WindowSample>> {
    let windows = plan.windows(step_budget)?;
    let b = cfg.schedule.size();
    let horizon = windows.iter().map(|w| w.offset + w.length).max().unwrap_or(0);
    let last_offset = windows.iter().map(|w| w.offset).max().unwrap_or(0);

    let mut samples: Vec<WindowSample> = windows
        .iter()
        .map(|w| WindowSample {
            n: w.n,
            offset: w.offset,
            length: w.length,
            size: b,
            states: Vec::with_capacity(w.length as usize + 1),
            log_mu_start: 0.0,
            step_logps: Vec::with_capacity(w.length as usize),
            seed: cfg.seed,
        })
        .collect();

    let mut walker = Walker::new(cfg, cfg.seed);
    let mut mu = cfg.mu0.weights().to_vec();
    let mut scratch = vec![0.0; b];
    let mut state = walker.initial(&cfg.mu0);
    let mut p_last = 1.0;

    for k in 0..=horizon {
        if k > 0 {
            let (next, p) = walker.step(k, state);
            state = next;
            p_last = p;
        }
        for s in samples.iter_mut() {
            if k == s.offset {
                s.log_mu_start = libm::log(mu[state]);
                s.states.push(state);
            } else if k > s.offset && k <= s.offset + s.length {
                s.step_logps.push(libm::log(p_last));
                s.states.push(state);
            }
        }
        if k < last_offset {
            propagate(&cfg.schedule, k + 1, &mut mu, &mut scratch);
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{LengthRule, OffsetRule, StochasticMatrix};

    fn flip_cfg(seed: u64) -> SimConfig {
        let flip = StochasticMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        SimConfig::new(
            TransitionSchedule::constant(flip),
            Distribution::point_mass(2, 0).unwrap(),
            seed,
            RngId::ChaCha8,
        )
        .unwrap()
    }

    fn p1_cfg(seed: u64) -> SimConfig {
        let p1 = StochasticMatrix::from_rows(&[[1.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 3.0]]).unwrap();
        SimConfig::new(
            TransitionSchedule::constant(p1),
            Distribution::point_mass(2, 0).unwrap(),
            seed,
            RngId::ChaCha8,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_chain() {
        let s = simulate_window(&flip_cfg(7), 0, 3).unwrap();
        assert_eq!(s.states, vec![0, 1, 0, 1]);
        assert_eq!(s.step_logps, vec![0.0; 3]);
        assert_eq!(s.log_mu_start, 0.0);

        let s = simulate_window(&flip_cfg(7), 5, 2).unwrap();
        assert_eq!(s.states, vec![1, 0, 1]);
        assert_eq!(s.log_mu_start, 0.0);
    }

    #[test]
    fn reproducible() {
        for rng in RngId::ALL {
            let cfg = SimConfig { rng, ..p1_cfg(42) };
            assert_eq!(
                simulate_window(&cfg, 10, 50).unwrap(),
                simulate_window(&cfg, 10, 50).unwrap()
            );
        }
        let a = simulate_window(&p1_cfg(42), 0, 64).unwrap();
        let b = simulate_window(&p1_cfg(43), 0, 64).unwrap();
        assert_ne!(a.states, b.states);
    }

    #[test]
    fn rng_ids_parse() {
        assert_eq!("chacha8".parse::<RngId>(), Ok(RngId::ChaCha8));
        assert_eq!("chacha20".parse::<RngId>(), Ok(RngId::ChaCha20));
        assert!("mt19937".parse::<RngId>().is_err());
    }

    #[test]
    fn inverse_cdf_skips_zero_mass() {
        assert_eq!(inverse_cdf([0.0, 1.0].into_iter(), 0.0), 1);
        assert_eq!(inverse_cdf([0.5, 0.5, 0.0].into_iter(), 0.999_999_999_999), 1);
        assert_eq!(inverse_cdf([0.25, 0.75].into_iter(), 0.25), 1);
        assert_eq!(inverse_cdf([0.25, 0.75].into_iter(), 0.2499), 0);
    }

    #[test]
    fn series_indices() {
        let cfg = p1_cfg(1);
        let plan = WindowPlan::new(OffsetRule::PowerOfTwo, LengthRule::Linear, vec![3]).unwrap();
        let s: Vec<_> = simulate_window_series(&cfg, &plan, DEFAULT_STEP_BUDGET).collect();
        let s = s[0].as_ref().unwrap();
        assert_eq!((s.n, s.offset, s.length, s.states.len()), (3, 8, 3, 4));
        assert_eq!(s.seed, derive_seed(1, 3));

        let plan = WindowPlan::new(OffsetRule::Zero, LengthRule::Linear, vec![5]).unwrap();
        let s = simulate_window_series(&cfg, &plan, DEFAULT_STEP_BUDGET)
            .next()
            .unwrap()
            .unwrap();
        assert_eq!((s.offset, s.states.len(), s.step_logps.len()), (0, 6, 5));

        let plan = WindowPlan::new(OffsetRule::PowerOfTwo, LengthRule::Linear, vec![2, 40]).unwrap();
        let out: Vec<_> = simulate_window_series(&cfg, &plan, DEFAULT_STEP_BUDGET).collect();
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::OverflowRisk { .. })));
    }

    #[test]
    fn trajectory_windows_are_consistent_slices() {
        let cfg = p1_cfg(9);
        let plan = WindowPlan::new(OffsetRule::Linear, LengthRule::Linear, vec![1, 2, 5, 9]).unwrap();
        let samples = simulate_trajectory(&cfg, &plan, DEFAULT_STEP_BUDGET).unwrap();
        // The longest trajectory contains every window as a slice.
        let full = simulate_window(&cfg, 0, 18).unwrap();
        for s in &samples {
            assert_eq!(s.states.len() as u64, s.length + 1);
            assert_eq!(s.step_logps.len() as u64, s.length);
            let lo = s.offset as usize;
            assert_eq!(&s.states[..], &full.states[lo..lo + s.length as usize + 1]);
            assert_eq!(&s.step_logps[..], &full.step_logps[lo..lo + s.length as usize]);
        }
    }
}

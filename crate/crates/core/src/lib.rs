//! Nonhomogeneous finite-state Markov chains observed through delayed windows.
//!
//! A chain `ξ_0, ξ_1, …` on states `0..b` is driven by a [`TransitionSchedule`]
//! that yields the transition matrix `P_k` used for step `k ≥ 1`. A
//! [`WindowPlan`] picks, for each index `n`, a window `ξ_{a_n}, …, ξ_{a_n+φ(n)}`
//! whose offset `a_n` may run far ahead of its length `φ(n)`. Over such a
//! window the crate computes
//!
//! * state and pair occupation counts,
//! * the generalized entropy density
//!   `f = -(1/φ(n)) · log P(ξ_{a_n}, …, ξ_{a_n+φ(n)})`,
//! * the plug-in entropy-rate estimator built from the counts,
//! * compensated delayed sums `(1/φ) Σ_k {g(ξ_{k-1}, ξ_k) - E[g(ξ_{k-1}, ·) | ξ_{k-1}]}`,
//!
//! and compares them against the stationary distribution `π` and entropy rate
//! `H = -Σ_i Σ_j π_i p(i,j) log p(i,j)` of the schedule's limit matrix.
//!
//! Everything here is pure computation over `alloc` types. File formats,
//! configuration, parallel orchestration and the command line live in the
//! companion `nhmc-cli` crate.
//!
//! States are 0-based in this crate. Logarithms are natural throughout, and
//! `0 · log 0` is taken to be `0`.
#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

pub mod chain;
pub mod diagnostics;
mod error;
pub mod matrix;
pub mod schedule;
pub mod sim;
pub mod stationary;
pub mod stats;
pub mod window;

pub use chain::{log_joint, marginal_at};
pub use error::{Error, Result};
pub use matrix::{Distribution, StochasticMatrix, ROW_SUM_TOLERANCE};
pub use schedule::{Decay, Segment, TransitionSchedule};
pub use sim::{RngId, SimConfig, WindowSample};
pub use stationary::{cesaro_stationary, entropy_rate, StationaryDistribution};
pub use stats::{DelayedWindowStats, WindowCounts};
pub use window::{LengthRule, OffsetRule, WindowPlan};

/// `x · ln x` with the convention `0 · ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * libm::log(x)
    } else {
        0.0
    }
}

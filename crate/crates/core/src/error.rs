use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong when building or evaluating chain objects.
///
/// Indices carried by variants are 0-based; the `Display` output reports
/// states and rows 1-based.
#[allow(missing_docs)]
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a chain needs at least 2 states, got {0}")]
    TooFewStates(usize),

    #[error("expected {expected} entries, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("entry ({}, {}) is negative: {value}", .row + 1, .col + 1)]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("entry ({}, {}) is not a finite number", .row + 1, .col + 1)]
    NonFiniteEntry { row: usize, col: usize },

    #[error("row {} sums to 1{deviation:+e}", .row + 1)]
    RowSumNotOne { row: usize, deviation: f64 },

    #[error("distribution weight {} is outside [0, 1]: {value}", .index + 1)]
    WeightOutOfRange { index: usize, value: f64 },

    #[error("distribution sums to 1{deviation:+e}")]
    WeightSumNotOne { deviation: f64 },

    #[error("size mismatch: expected {expected} states, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("state {} is not reachable from state {}; the matrix is not irreducible", .to + 1, .from + 1)]
    NotIrreducible { from: usize, to: usize },

    #[error("stationary solve did not converge (balance residual {residual:e})")]
    SingularBalance { residual: f64 },

    #[error("state {} is outside 1..={size}", .state + 1)]
    StateOutOfRange { state: usize, size: usize },

    #[error("path has zero probability at step {k}")]
    ZeroProbabilityStep { k: u64 },

    #[error("a window needs at least one state")]
    EmptyPath,

    #[error("window ending at step {end} exceeds the step budget of {budget}")]
    OverflowRisk { end: u128, budget: u64 },

    #[error("sample carries a non-finite log-probability term")]
    NonFiniteInput,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),

    #[error("invalid window plan: {0}")]
    InvalidPlan(&'static str),

    #[error("window plan has no value at n = {n}")]
    PlanIndexOutOfRange { n: u64 },

    #[error("window length is 0 at n = {n}")]
    EmptyWindow { n: u64 },
}

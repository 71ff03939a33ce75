//! Stationary distributions, Cesàro averages of matrix powers, entropy rate.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{xlogx, Distribution, Error, Result, StochasticMatrix};

/// Largest accepted `‖πP − π‖∞` for a solved stationary law.
pub const BALANCE_TOLERANCE: f64 = 1e-10;

/// The unique stationary law `π` of an irreducible matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StationaryDistribution {
    weights: Distribution,
    residual: f64,
}

impl StationaryDistribution {
    /// Solves `πP = π`, `Σπ = 1` for an irreducible `P`.
    ///
    /// Irreducibility is checked on the positivity pattern first. The balance
    /// system `π(P − I) = 0` has rank `b − 1`; its last equation is replaced by
    /// the normalization and the square system is solved by LU.
    pub fn solve(p: &StochasticMatrix) -> Result<Self> {
        check_irreducible(p)?;
        let b = p.size();
        // Rows of the transposed system: (Pᵀ − I) πᵀ = 0.
        let mut a = DMatrix::<f64>::from_fn(b, b, |r, c| p.get(c, r) - if r == c { 1.0 } else { 0.0 });
        let mut rhs = DVector::<f64>::zeros(b);
        for c in 0..b {
            a[(b - 1, c)] = 1.0;
        }
        rhs[b - 1] = 1.0;
        let solution = a.lu().solve(&rhs).ok_or(Error::SingularBalance {
            residual: f64::INFINITY,
        })?;
        let weights = Distribution::normalized_unchecked(solution.iter().copied().collect());
        let residual = balance_residual(p, weights.weights());
        if residual.is_nan() || residual > BALANCE_TOLERANCE {
            return Err(Error::SingularBalance { residual });
        }
        Ok(Self { weights, residual })
    }

    /// `π` as a distribution.
    pub fn distribution(&self) -> &Distribution {
        &self.weights
    }

    /// `π_i` in state order.
    pub fn weights(&self) -> &[f64] {
        self.weights.weights()
    }

    /// `‖πP − π‖∞` of the solution.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// `‖πP − π‖∞`.
pub fn balance_residual(p: &StochasticMatrix, pi: &[f64]) -> f64 {
    let b = p.size();
    (0..b)
        .map(|j| {
            let flow: f64 = (0..b).map(|i| pi[i] * p.get(i, j)).sum();
            libm::fabs(flow - pi[j])
        })
        .fold(0.0, f64::max)
}

/// Verifies that the directed graph `i → j` iff `p(i, j) > 0` is strongly
/// connected, reporting the first unreachable ordered pair otherwise.
pub fn check_irreducible(p: &StochasticMatrix) -> Result<()> {
    let b = p.size();
    let mut seen = vec![false; b];
    let mut stack = Vec::with_capacity(b);
    for from in 0..b {
        seen.iter_mut().for_each(|s| *s = false);
        seen[from] = true;
        stack.push(from);
        while let Some(i) = stack.pop() {
            for (j, &q) in p.row(i).iter().enumerate() {
                if q > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(to) = seen.iter().position(|&s| !s) {
            return Err(Error::NotIrreducible { from, to });
        }
    }
    Ok(())
}

/// Row `i` of `(1/m) Σ_{l=1}^m P^l` for every `i`.
///
/// For irreducible `P` each row tends to `π` as `m` grows, periodic or not.
/// Costs `O(m · b³)`.
pub fn cesaro_stationary(p: &StochasticMatrix, m: u64) -> Vec<Distribution> {
    let m = m.max(1);
    let b = p.size();
    let base = DMatrix::<f64>::from_row_slice(b, b, p.entries());
    let mut power = base.clone();
    let mut acc = base.clone();
    for _ in 1..m {
        power = &power * &base;
        acc += &power;
    }
    acc /= m as f64;
    (0..b)
        .map(|i| Distribution::normalized_unchecked(acc.row(i).iter().copied().collect()))
        .collect()
}

/// `H = −Σ_i Σ_j π_i p(i,j) log p(i,j)` in nats per step.
///
/// Lies in `[0, log b]`; tiny negative rounding is clamped to `0`.
pub fn entropy_rate(p: &StochasticMatrix, pi: &StationaryDistribution) -> f64 {
    entropy_rate_with(p, pi.weights())
}

/// [`entropy_rate`] against an arbitrary weighting of the rows.
pub fn entropy_rate_with(p: &StochasticMatrix, weights: &[f64]) -> f64 {
    let h: f64 = p
        .rows()
        .zip(weights)
        .map(|(row, &w)| -w * row.iter().map(|&q| xlogx(q)).sum::<f64>())
        .sum();
    h.max(0.0)
}

//! Row-stochastic matrices and probability vectors.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Absolute tolerance on row sums and distribution sums at construction.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A validated `b × b` row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StochasticMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates `entries` (row-major, `size * size` values).
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size < 2 {
            return Err(Error::TooFewStates(size));
        }
        if entries.len() != size * size {
            return Err(Error::ShapeMismatch {
                expected: size * size,
                actual: entries.len(),
            });
        }
        for (idx, &p) in entries.iter().enumerate() {
            let (row, col) = (idx / size, idx % size);
            if !p.is_finite() {
                return Err(Error::NonFiniteEntry { row, col });
            }
            if p < 0.0 {
                return Err(Error::NegativeEntry { row, col, value: p });
            }
        }
        for (row, chunk) in entries.chunks_exact(size).enumerate() {
            let deviation = chunk.iter().sum::<f64>() - 1.0;
            if deviation.abs() > ROW_SUM_TOLERANCE {
                return Err(Error::RowSumNotOne { row, deviation });
            }
        }
        Ok(Self { size, entries })
    }

    /// Builds a matrix from a slice of rows. Every row must have `rows.len()` entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            let row = row.as_ref();
            if row.len() != size {
                return Err(Error::ShapeMismatch {
                    expected: size,
                    actual: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(size, entries)
    }

    /// The `b × b` matrix with every entry `1/b`.
    pub fn uniform(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::TooFewStates(size));
        }
        Self::new(size, alloc::vec![1.0 / size as f64; size * size])
    }

    /// Number of states `b`.
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Transition probability `p(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Row `i`, the conditional law of the next state given state `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Iterator over rows.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.size)
    }

    /// Skips validation. Callers guarantee the invariants.
    pub(crate) fn from_entries_unchecked(size: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), size * size);
        Self { size, entries }
    }
}

/// A probability vector over `b` states.
///
/// Used for initial laws `μ_0`, propagated marginals `μ_n`, and Cesàro rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Validates a probability vector. At least two states are required.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::TooFewStates(weights.len()));
        }
        for (index, &w) in weights.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::WeightOutOfRange { index, value: w });
            }
        }
        let deviation = weights.iter().sum::<f64>() - 1.0;
        if deviation.abs() > ROW_SUM_TOLERANCE {
            return Err(Error::WeightSumNotOne { deviation });
        }
        Ok(Self { weights })
    }

    /// All mass on `state`.
    pub fn point_mass(size: usize, state: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::TooFewStates(size));
        }
        if state >= size {
            return Err(Error::StateOutOfRange { state, size });
        }
        let mut weights = alloc::vec![0.0; size];
        weights[state] = 1.0;
        Ok(Self { weights })
    }

    /// Equal mass on every state.
    pub fn uniform(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::TooFewStates(size));
        }
        Ok(Self {
            weights: alloc::vec![1.0 / size as f64; size],
        })
    }

    /// Number of states.
    #[inline]
    pub fn size(&self) -> usize {
        self.weights.len()
    }

    /// Weights in state order.
    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of one state.
    #[inline]
    pub fn get(&self, state: usize) -> f64 {
        self.weights[state]
    }

    /// Clamps rounding negatives to zero and rescales to unit mass.
    pub(crate) fn normalized_unchecked(mut weights: Vec<f64>) -> Self {
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            for w in weights.iter_mut() {
                *w /= total;
            }
        }
        Self { weights }
    }
}

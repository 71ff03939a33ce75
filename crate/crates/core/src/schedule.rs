//! Transition schedules `k ↦ P_k` together with their candidate limit matrix.

use alloc::borrow::Cow;
use alloc::vec::Vec;

use crate::{Error, Result, StochasticMatrix};

/// Decay profile `c_k` of a perturbed schedule, for `k ≥ 1`.
///
/// Every profile has constant sign and nonincreasing magnitude, so
/// `|c_k| ≤ |c_1|` for all `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Decay {
    /// `c_k = scale / k`.
    Harmonic {
        /// Coefficient at `k = 1`.
        scale: f64,
    },
    /// `c_k = scale · k^(-exponent)` with `exponent > 0`.
    Power {
        /// Coefficient at `k = 1`.
        scale: f64,
        /// Decay exponent.
        exponent: f64,
    },
    /// `c_k = scale · ratio^(k-1)` with `0 < ratio < 1`.
    Geometric {
        /// Coefficient at `k = 1`.
        scale: f64,
        /// Per-step ratio.
        ratio: f64,
    },
}

impl Decay {
    /// Coefficient `c_k`.
    pub fn at(&self, k: u64) -> f64 {
        let k = k as f64;
        match *self {
            Decay::Harmonic { scale } => scale / k,
            Decay::Power { scale, exponent } => scale * libm::pow(k, -exponent),
            Decay::Geometric { scale, ratio } => scale * libm::pow(ratio, k - 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Decay::Harmonic { scale } => scale.is_finite(),
            Decay::Power { scale, exponent } => scale.is_finite() && exponent.is_finite() && exponent > 0.0,
            Decay::Geometric { scale, ratio } => scale.is_finite() && ratio > 0.0 && ratio < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSchedule("decay parameters out of range"))
        }
    }
}

/// A fixed matrix used on the inclusive step range `start..=end`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Segment {
    /// First step (≥ 1).
    pub start: u64,
    /// Last step, inclusive.
    pub end: u64,
    /// Matrix used on the range.
    pub matrix: StochasticMatrix,
}

/// The parametric family behind a schedule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ScheduleKind {
    /// `P_k = P` for every `k`.
    Constant,
    /// `P_k = P + c_k · D` with zero-row-sum `D`.
    Perturbed {
        /// Direction `D`, row-major.
        direction: Vec<f64>,
        /// Coefficients `c_k`.
        decay: Decay,
    },
    /// Two-state schedule that uses `P1 = [[1/3, 2/3], [2/3, 1/3]]` on the
    /// steps `2^m ≤ k ≤ 2^m + m` (`m = 0, 1, …`) and the uniform `P2`
    /// elsewhere, with limit `P2`.
    ///
    /// Its prefix averages `(1/n) Σ_{k≤n} |p_k - p|` vanish while the delayed
    /// averages over `k ∈ (2^n, 2^n + n]` stay at `1/6`.
    Counterexample {
        /// The sparse matrix `P1`.
        sparse: StochasticMatrix,
    },
    /// Listed matrices on disjoint step ranges, the limit matrix elsewhere.
    Piecewise {
        /// Sorted, disjoint segments.
        segments: Vec<Segment>,
    },
}

/// A nonhomogeneous transition schedule with its candidate limit matrix `P`.
///
/// Evaluation at step `k` is pure and costs `O(b²)` at most.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TransitionSchedule {
    limit: StochasticMatrix,
    kind: ScheduleKind,
}

impl TransitionSchedule {
    /// Homogeneous chain.
    pub fn constant(matrix: StochasticMatrix) -> Self {
        Self {
            limit: matrix,
            kind: ScheduleKind::Constant,
        }
    }

    /// `P_k = limit + c_k · direction`.
    ///
    /// `direction` is row-major with zero row sums. Because `c_k` lies between
    /// `0` and `c_1`, it is enough to check that `limit + c_1 · direction`
    /// is stochastic.
    pub fn perturbed(limit: StochasticMatrix, direction: Vec<f64>, decay: Decay) -> Result<Self> {
        let b = limit.size();
        if direction.len() != b * b {
            return Err(Error::ShapeMismatch {
                expected: b * b,
                actual: direction.len(),
            });
        }
        if direction.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidSchedule("perturbation has non-finite entries"));
        }
        for row in direction.chunks_exact(b) {
            if row.iter().sum::<f64>().abs() > crate::ROW_SUM_TOLERANCE {
                return Err(Error::InvalidSchedule("perturbation rows must sum to zero"));
            }
        }
        decay.validate()?;
        let c1 = decay.at(1);
        let extreme: Vec<f64> = limit
            .entries()
            .iter()
            .zip(&direction)
            .map(|(p, d)| p + c1 * d)
            .collect();
        if extreme.iter().any(|&p| !(-1e-15..=1.0 + 1e-15).contains(&p)) {
            return Err(Error::InvalidSchedule(
                "perturbed entries leave [0, 1] at the first step",
            ));
        }
        Ok(Self {
            limit,
            kind: ScheduleKind::Perturbed { direction, decay },
        })
    }

    /// The two-state schedule whose prefix averages converge to its limit but
    /// whose delayed averages at offsets `2^n` do not.
    pub fn counterexample() -> Self {
        let third = 1.0 / 3.0;
        let sparse = StochasticMatrix::from_entries_unchecked(2, alloc::vec![third, 2.0 / 3.0, 2.0 / 3.0, third]);
        let limit = StochasticMatrix::from_entries_unchecked(2, alloc::vec![0.5; 4]);
        Self {
            limit,
            kind: ScheduleKind::Counterexample { sparse },
        }
    }

    /// Piecewise-constant schedule; steps outside every segment use `limit`.
    pub fn piecewise(mut segments: Vec<Segment>, limit: StochasticMatrix) -> Result<Self> {
        segments.sort_by_key(|s| s.start);
        for seg in &segments {
            if seg.start == 0 || seg.end < seg.start {
                return Err(Error::InvalidSchedule("segment range must satisfy 1 <= start <= end"));
            }
            if seg.matrix.size() != limit.size() {
                return Err(Error::SizeMismatch {
                    expected: limit.size(),
                    actual: seg.matrix.size(),
                });
            }
        }
        if segments.windows(2).any(|w| w[1].start <= w[0].end) {
            return Err(Error::InvalidSchedule("segments overlap"));
        }
        Ok(Self {
            limit,
            kind: ScheduleKind::Piecewise { segments },
        })
    }

    /// The candidate limit matrix `P`.
    #[inline]
    pub fn limit(&self) -> &StochasticMatrix {
        &self.limit
    }

    /// Family and parameters.
    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Number of states.
    #[inline]
    pub fn size(&self) -> usize {
        self.limit.size()
    }

    /// `P_k`. Borrowed unless the schedule is perturbed.
    ///
    /// # Panics
    /// If `k == 0`; the first transition is step 1.
    pub fn at(&self, k: u64) -> Cow<'_, StochasticMatrix> {
        assert!(k >= 1, "transition steps start at k = 1");
        match &self.kind {
            ScheduleKind::Constant => Cow::Borrowed(&self.limit),
            ScheduleKind::Counterexample { sparse } => {
                if counterexample_uses_sparse(k) {
                    Cow::Borrowed(sparse)
                } else {
                    Cow::Borrowed(&self.limit)
                }
            }
            ScheduleKind::Piecewise { segments } => Cow::Borrowed(segment_at(segments, k).unwrap_or(&self.limit)),
            ScheduleKind::Perturbed { .. } => {
                let b = self.size();
                let entries = (0..b * b).map(|idx| self.prob(k, idx / b, idx % b)).collect();
                Cow::Owned(StochasticMatrix::from_entries_unchecked(b, entries))
            }
        }
    }

    /// Single entry `p_k(i, j)`, without materializing `P_k`.
    #[inline]
    pub fn prob(&self, k: u64, i: usize, j: usize) -> f64 {
        debug_assert!(k >= 1);
        match &self.kind {
            ScheduleKind::Constant => self.limit.get(i, j),
            ScheduleKind::Counterexample { sparse } => {
                if counterexample_uses_sparse(k) {
                    sparse.get(i, j)
                } else {
                    self.limit.get(i, j)
                }
            }
            ScheduleKind::Piecewise { segments } => segment_at(segments, k).unwrap_or(&self.limit).get(i, j),
            ScheduleKind::Perturbed { direction, decay } => {
                let b = self.size();
                let p = self.limit.get(i, j) + decay.at(k) * direction[i * b + j];
                p.clamp(0.0, 1.0)
            }
        }
    }
}

/// Whether step `k` of the counterexample schedule uses `P1`, i.e.
/// `2^m ≤ k ≤ 2^m + m` for some `m ≥ 0`.
///
/// The ranges are disjoint and `2^m + m < 2^(m+1)`, so only
/// `m = ⌊log₂ k⌋` can match.
#[inline]
pub fn counterexample_uses_sparse(k: u64) -> bool {
    if k == 0 {
        return false;
    }
    let m = 63 - u64::from(k.leading_zeros());
    k - (1u64 << m) <= m
}

fn segment_at(segments: &[Segment], k: u64) -> Option<&StochasticMatrix> {
    let idx = segments.partition_point(|s| s.start <= k);
    if idx == 0 {
        return None;
    }
    let seg = &segments[idx - 1];
    (k <= seg.end).then_some(&seg.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[[1.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 3.0]]).unwrap()
    }

    /// Brute-force membership by enumerating every range `[2^m, 2^m + m]`.
    fn uses_sparse_by_enumeration(k: u64) -> bool {
        (0..64u32).any(|m| {
            let lo = 1u128 << m;
            let hi = lo + u128::from(m);
            (lo..=hi).contains(&u128::from(k))
        })
    }

    #[test]
    fn counterexample_rule_matches_enumeration() {
        for k in 1..5000 {
            assert_eq!(counterexample_uses_sparse(k), uses_sparse_by_enumeration(k), "k = {k}");
        }
        for m in 2..63u64 {
            let lo = 1u64 << m;
            assert!(counterexample_uses_sparse(lo + m));
            assert!(!counterexample_uses_sparse(lo + m + 1));
        }
    }

    #[test]
    fn counterexample_examples() {
        let s = TransitionSchedule::counterexample();
        let p1 = p1();
        let p2 = StochasticMatrix::uniform(2).unwrap();
        assert_eq!(*s.at(1), p1);
        assert_eq!(*s.at(2), p1);
        assert_eq!(*s.at(4), p1);
        assert_eq!(*s.at(7), p2);
        assert_eq!(*s.at(100), p2);
        assert_eq!(s.limit(), &p2);
    }

    #[test]
    fn constant_returns_limit() {
        let s = TransitionSchedule::constant(p1());
        for k in [1, 2, 1000, u64::MAX] {
            assert_eq!(*s.at(k), p1());
        }
    }

    #[test]
    fn perturbed_rejects_bad_inputs() {
        let d = alloc::vec![0.05, -0.05, -0.05, 0.05];
        let ok = TransitionSchedule::perturbed(p1(), d.clone(), Decay::Harmonic { scale: 1.0 });
        assert!(ok.is_ok());
        let too_big = TransitionSchedule::perturbed(p1(), d.clone(), Decay::Harmonic { scale: 20.0 });
        assert!(matches!(too_big, Err(Error::InvalidSchedule(_))));
        let unbalanced = alloc::vec![0.05, 0.0, -0.05, 0.05];
        assert!(TransitionSchedule::perturbed(p1(), unbalanced, Decay::Harmonic { scale: 1.0 }).is_err());
        assert!(TransitionSchedule::perturbed(p1(), d, Decay::Geometric { scale: 1.0, ratio: 1.0 }).is_err());
    }

    #[test]
    fn perturbed_values() {
        let d = alloc::vec![0.05, -0.05, -0.05, 0.05];
        let s = TransitionSchedule::perturbed(p1(), d, Decay::Harmonic { scale: 1.0 }).unwrap();
        assert!((s.prob(1, 0, 0) - (1.0 / 3.0 + 0.05)).abs() < 1e-15);
        assert!((s.prob(10, 1, 0) - (2.0 / 3.0 - 0.005)).abs() < 1e-15);
        let m = s.at(4);
        assert!((m.get(0, 1) - (2.0 / 3.0 - 0.0125)).abs() < 1e-15);
    }

    #[test]
    fn piecewise_lookup() {
        let p2 = StochasticMatrix::uniform(2).unwrap();
        let id = StochasticMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let segs = alloc::vec![
            Segment {
                start: 5,
                end: 6,
                matrix: id.clone()
            },
            Segment {
                start: 1,
                end: 2,
                matrix: p1()
            },
        ];
        let s = TransitionSchedule::piecewise(segs, p2.clone()).unwrap();
        assert_eq!(*s.at(1), p1());
        assert_eq!(*s.at(2), p1());
        assert_eq!(*s.at(3), p2);
        assert_eq!(*s.at(5), id);
        assert_eq!(*s.at(7), p2);

        let overlapping = alloc::vec![
            Segment {
                start: 1,
                end: 3,
                matrix: p1()
            },
            Segment {
                start: 3,
                end: 4,
                matrix: p1()
            },
        ];
        assert!(TransitionSchedule::piecewise(overlapping, p2.clone()).is_err());
        let zero = alloc::vec![Segment {
            start: 0,
            end: 3,
            matrix: p1()
        }];
        assert!(TransitionSchedule::piecewise(zero, p2).is_err());
    }
}

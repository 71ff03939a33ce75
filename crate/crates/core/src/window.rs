//! Delayed-window plans: the offset sequence `a_n` and length sequence `φ(n)`.

use alloc::vec::Vec;

use crate::{Error, Result};

/// How the window offset `a_n` depends on `n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum OffsetRule {
    /// `a_n = 0`, the classical undelayed window.
    Zero,
    /// `a_n = n`.
    Linear,
    /// `a_n = 2^n`.
    PowerOfTwo,
    /// `a_n = list[n]`.
    Custom(Vec<u64>),
}

/// How the window length `φ(n)` depends on `n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum LengthRule {
    /// `φ(n) = n`.
    Linear,
    /// `φ(n) = ⌊n^α⌋`, `α > 0`.
    Poly(f64),
    /// `φ(n) = list[n]`.
    Custom(Vec<u64>),
}

impl OffsetRule {
    /// `a_n`, or `None` when it does not fit in `u64` or a custom list is too short.
    pub fn at(&self, n: u64) -> Option<u64> {
        match self {
            OffsetRule::Zero => Some(0),
            OffsetRule::Linear => Some(n),
            OffsetRule::PowerOfTwo => u32::try_from(n).ok().and_then(|e| 2u64.checked_pow(e)),
            OffsetRule::Custom(list) => usize::try_from(n).ok().and_then(|i| list.get(i).copied()),
        }
    }
}

impl LengthRule {
    /// `φ(n)`, or `None` when a custom list is too short.
    pub fn at(&self, n: u64) -> Option<u64> {
        match self {
            LengthRule::Linear => Some(n),
            LengthRule::Poly(alpha) => Some(floor_power(n, *alpha)),
            LengthRule::Custom(list) => usize::try_from(n).ok().and_then(|i| list.get(i).copied()),
        }
    }
}

/// `⌊n^α⌋`, snapping to the nearest integer when `n^α` lands within
/// rounding distance of it (so `⌊16^0.5⌋` is 4, not 3).
pub fn floor_power(n: u64, alpha: f64) -> u64 {
    let v = libm::pow(n as f64, alpha);
    let r = libm::round(v);
    if libm::fabs(v - r) <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        libm::floor(v) as u64
    }
}

/// One window `ξ_{a_n}, …, ξ_{a_n+φ(n)}` of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Window {
    /// Grid index `n`.
    pub n: u64,
    /// Offset `a_n`.
    pub offset: u64,
    /// Length `φ(n)` (number of transitions).
    pub length: u64,
}

impl Window {
    /// Index of the last state, `a_n + φ(n)`, widened so it cannot overflow.
    pub fn end(&self) -> u128 {
        u128::from(self.offset) + u128::from(self.length)
    }
}

/// The sequences `(a_n)`, `(φ(n))` and the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct WindowPlan {
    offset: OffsetRule,
    length: LengthRule,
    grid: Vec<u64>,
}

impl WindowPlan {
    /// Validates the grid (nonempty, strictly increasing), the rules, and
    /// `φ(n) ≥ 1` on every grid point. Offsets are not checked here: an
    /// offset too large to represent surfaces as an overflow when simulating.
    pub fn new(offset: OffsetRule, length: LengthRule, grid: Vec<u64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidPlan("n_grid is empty"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPlan("n_grid not increasing"));
        }
        if let LengthRule::Poly(alpha) = length {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::InvalidPlan("poly exponent must be positive"));
            }
        }
        for &n in &grid {
            match length.at(n) {
                None => return Err(Error::PlanIndexOutOfRange { n }),
                Some(0) => return Err(Error::EmptyWindow { n }),
                Some(_) => {}
            }
            if let OffsetRule::Custom(list) = &offset {
                if usize::try_from(n).map_or(true, |i| i >= list.len()) {
                    return Err(Error::PlanIndexOutOfRange { n });
                }
            }
        }
        Ok(Self { offset, length, grid })
    }

    /// Offset rule.
    pub fn offset_rule(&self) -> &OffsetRule {
        &self.offset
    }

    /// Length rule.
    pub fn length_rule(&self) -> &LengthRule {
        &self.length
    }

    /// Evaluation indices `n`.
    pub fn grid(&self) -> &[u64] {
        &self.grid
    }

    /// The window at `n`, whether or not `n` is on the grid.
    pub fn window(&self, n: u64) -> Result<Window> {
        let length = self.length.at(n).ok_or(Error::PlanIndexOutOfRange { n })?;
        if length == 0 {
            return Err(Error::EmptyWindow { n });
        }
        let offset = self.offset.at(n).ok_or(Error::OverflowRisk {
            end: u128::MAX,
            budget: u64::MAX,
        })?;
        Ok(Window { n, offset, length })
    }

    /// Every grid window, each checked against `step_budget` (`a_n + φ(n) ≤ budget`).
    pub fn windows(&self, step_budget: u64) -> Result<Vec<Window>> {
        self.grid
            .iter()
            .map(|&n| {
                let w = self.window(n).map_err(|e| match e {
                    Error::OverflowRisk { end, .. } => Error::OverflowRisk {
                        end,
                        budget: step_budget,
                    },
                    other => other,
                })?;
                if w.end() > u128::from(step_budget) {
                    return Err(Error::OverflowRisk {
                        end: w.end(),
                        budget: step_budget,
                    });
                }
                Ok(w)
            })
            .collect()
    }
}

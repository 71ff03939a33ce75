//! Exact marginals and log-probabilities of chain windows.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Distribution, Error, Result, TransitionSchedule};

fn check_size(schedule: &TransitionSchedule, mu0: &Distribution) -> Result<()> {
    if schedule.size() != mu0.size() {
        return Err(Error::SizeMismatch {
            expected: schedule.size(),
            actual: mu0.size(),
        });
    }
    Ok(())
}

/// In-place `μ ← μ P_k`, renormalized to unit mass.
pub(crate) fn propagate(schedule: &TransitionSchedule, k: u64, mu: &mut [f64], scratch: &mut [f64]) {
    let b = mu.len();
    scratch.iter_mut().for_each(|x| *x = 0.0);
    for (i, &w) in mu.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (j, out) in scratch.iter_mut().enumerate().take(b) {
            *out += w * schedule.prob(k, i, j);
        }
    }
    let total: f64 = scratch.iter().sum();
    for (dst, &src) in mu.iter_mut().zip(scratch.iter()) {
        *dst = src / total;
    }
}

/// Law of `ξ_n`, i.e. `μ_0 · P_1 ⋯ P_n`.
///
/// `O(n · b²)` time and `O(b)` memory. Mass is renormalized after every step
/// so long propagations do not drift off the simplex.
pub fn marginal_at(schedule: &TransitionSchedule, mu0: &Distribution, n: u64) -> Result<Distribution> {
    check_size(schedule, mu0)?;
    let mut mu = mu0.weights().to_vec();
    let mut scratch = vec![0.0; mu.len()];
    for k in 1..=n {
        propagate(schedule, k, &mut mu, &mut scratch);
    }
    Ok(Distribution::normalized_unchecked(mu))
}

/// `log P(ξ_m = x_m, …, ξ_{m+n} = x_{m+n})` for `path = [x_m, …, x_{m+n}]`
/// (0-based states), i.e. `log μ_m(x_m) + Σ_{k=m+1}^{m+n} log p_k(x_{k-1}, x_k)`.
///
/// A zero-probability initial state is reported as step `m`.
pub fn log_joint(schedule: &TransitionSchedule, mu0: &Distribution, path: &[usize], offset: u64) -> Result<f64> {
    let mu = marginal_at(schedule, mu0, offset)?;
    log_joint_from_marginal(schedule, &mu, path, offset)
}

/// Same as [`log_joint`] with the marginal `μ_offset` already known.
pub fn log_joint_from_marginal(
    schedule: &TransitionSchedule,
    mu_offset: &Distribution,
    path: &[usize],
    offset: u64,
) -> Result<f64> {
    check_size(schedule, mu_offset)?;
    let b = schedule.size();
    let (&first, _) = path.split_first().ok_or(Error::EmptyPath)?;
    if let Some(&state) = path.iter().find(|&&s| s >= b) {
        return Err(Error::StateOutOfRange { state, size: b });
    }
    let start = mu_offset.get(first);
    if start <= 0.0 {
        return Err(Error::ZeroProbabilityStep { k: offset });
    }
    let mut total = libm::log(start);
    for (step, pair) in path.windows(2).enumerate() {
        let k = offset + step as u64 + 1;
        let p = schedule.prob(k, pair[0], pair[1]);
        if p <= 0.0 {
            return Err(Error::ZeroProbabilityStep { k });
        }
        total += libm::log(p);
    }
    Ok(total)
}

/// All `b^len` state sequences of length `len`, in lexicographic order.
/// Test oracle helper; exponential in `len`.
#[doc(hidden)]
pub fn enumerate_paths(b: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..b).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

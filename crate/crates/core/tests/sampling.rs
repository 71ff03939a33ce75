//! Statistical checks of the simulator at fixed seeds.

use nhmc::sim::{derive_seed, simulate_window, simulate_window_series, SimConfig, DEFAULT_STEP_BUDGET};
use nhmc::stats::count_stats;
use nhmc::{Distribution, LengthRule, OffsetRule, RngId, StochasticMatrix, TransitionSchedule, WindowPlan};

fn p1() -> StochasticMatrix {
    StochasticMatrix::from_rows(&[[1.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 3.0]]).unwrap()
}

#[test]
fn first_step_is_binomial() {
    let cfg = SimConfig::new(
        TransitionSchedule::constant(p1()),
        Distribution::point_mass(2, 0).unwrap(),
        0,
        RngId::ChaCha8,
    )
    .unwrap();
    let trials = 1_000_000u64;
    let hits = (0..trials)
        .filter(|&s| {
            simulate_window(&cfg.with_seed(derive_seed(2024, s)), 0, 1)
                .unwrap()
                .states[1]
                == 1
        })
        .count() as f64;
    let p = 2.0 / 3.0;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let frac = hits / trials as f64;
    assert!((frac - p).abs() <= 3.0 * se, "fraction {frac}, se {se}");
}

#[test]
fn one_step_law_matches_schedule_rows() {
    // Three states, counterexample-style switching between two kernels.
    let a = StochasticMatrix::from_rows(&[[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.25, 0.25, 0.5]]).unwrap();
    let b = StochasticMatrix::from_rows(&[[0.7, 0.2, 0.1], [0.1, 0.1, 0.8], [0.3, 0.6, 0.1]]).unwrap();
    let segments = (0..200)
        .map(|i| nhmc::Segment {
            start: 2 * i + 1,
            end: 2 * i + 1,
            matrix: a.clone(),
        })
        .collect();
    let schedule = TransitionSchedule::piecewise(segments, b).unwrap();
    for rng in RngId::ALL {
        let cfg = SimConfig::new(schedule.clone(), Distribution::uniform(3).unwrap(), 11, rng).unwrap();
        // Transitions out of odd-indexed steps use `a`, even ones use the limit.
        let mut counts = [[[0u64; 3]; 3]; 2];
        for s in 0..400u64 {
            let sample = simulate_window(&cfg.with_seed(s), 0, 400).unwrap();
            for (step, w) in sample.states.windows(2).enumerate() {
                let k = step as u64 + 1;
                counts[(k % 2) as usize][w[0]][w[1]] += 1;
            }
        }
        for parity in 0..2u64 {
            let k = if parity == 1 { 1 } else { 2 };
            for (i, row) in counts[parity as usize].iter().enumerate() {
                let total: u64 = row.iter().sum();
                for (j, &c) in row.iter().enumerate() {
                    let p = schedule.prob(k, i, j);
                    let se = (p * (1.0 - p) / total as f64).sqrt();
                    let freq = c as f64 / total as f64;
                    assert!((freq - p).abs() <= 4.0 * se, "{rng}: k={k} ({i},{j}) {freq} vs {p}");
                }
            }
        }
    }
}

#[test]
fn series_windows_reproduce_individually() {
    let cfg = SimConfig::new(
        TransitionSchedule::counterexample(),
        Distribution::uniform(2).unwrap(),
        77,
        RngId::ChaCha20,
    )
    .unwrap();
    let plan = WindowPlan::new(OffsetRule::PowerOfTwo, LengthRule::Linear, vec![2, 5, 9]).unwrap();
    let all: Vec<_> = simulate_window_series(&cfg, &plan, DEFAULT_STEP_BUDGET)
        .map(Result::unwrap)
        .collect();
    let single_plan = WindowPlan::new(OffsetRule::PowerOfTwo, LengthRule::Linear, vec![5]).unwrap();
    let single = simulate_window_series(&cfg, &single_plan, DEFAULT_STEP_BUDGET)
        .next()
        .unwrap()
        .unwrap();
    assert_eq!(all[1], single);
    // The running marginal of the uniform start under doubly stochastic kernels stays uniform.
    for s in &all {
        assert!((s.log_mu_start - 0.5f64.ln()).abs() < 1e-15);
        let c = count_stats(s);
        assert_eq!(c.state_counts.iter().sum::<u64>(), s.length);
    }
}

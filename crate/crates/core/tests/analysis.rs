use std::sync::Arc;

use brnsim_core::analysis::{
    azuma_bound, consensus_gap, estimate_consensus_prob, exact_naive_win_prob, gap_sweep, solve_naive, sweep_slope,
    wilson_interval, ConsensusExperiment, EstimateResult, NaiveChainSpec, RateFn, SweepConfig,
};
use brnsim_core::protocols::{ProtocolKind, ProtocolSpec};
use brnsim_core::Error;
use proptest::prelude::*;

/// Probability that `B` dies out first by Gauss-Seidel sweeps over the
/// absorbing chain, states with `a + b <= n`.
fn win_oracle(spec: &NaiveChainSpec, n: u64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; n as usize + 1]; n as usize + 1];
    for row in p.iter_mut().skip(1) {
        row[0] = 1.0;
    }
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for t in 2..=n {
            for a in 1..t {
                let b = t - a;
                let [ab, ad, bb, bd] = spec.rates(a, b);
                let total = ab + ad + bb + bd;
                let get = |x: u64, y: u64| if x + y <= n { p[x as usize][y as usize] } else { 0.0 };
                let v = (ab * get(a + 1, b) + ad * get(a - 1, b) + bb * get(a, b + 1) + bd * get(a, b - 1)) / total;
                delta = delta.max((v - p[a as usize][b as usize]).abs());
                p[a as usize][b as usize] = v;
            }
        }
        if delta < 1e-15 {
            break;
        }
    }
    p
}

fn rate(f: impl Fn(u64, u64) -> f64 + Send + Sync + 'static) -> RateFn {
    Arc::new(f)
}

#[test]
fn lemma_cases() {
    let birth_free = NaiveChainSpec::constant(0.0, 1.0, None);
    assert!((exact_naive_win_prob(&birth_free, 1, 1).unwrap() - 0.5).abs() < 1e-15);
    let with_births = NaiveChainSpec::constant(0.4, 1.0, Some(12));
    assert!((exact_naive_win_prob(&with_births, 3, 1).unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn capped_state_dependent_rates_match_oracle() {
    let spec = NaiveChainSpec::symmetric(
        rate(|a, b| 0.3 + 0.1 * ((a * b) % 5) as f64),
        rate(|a, b| 0.5 + 0.02 * (a + b) as f64),
        Some(12),
    );
    let sol = solve_naive(&spec, 12).unwrap();
    assert!(sol.residual <= 1e-10);
    let oracle = win_oracle(&spec, 12);
    for (a, b, p) in sol.rows() {
        assert!((p - oracle[a as usize][b as usize]).abs() < 1e-9, "({a},{b})");
        assert!((p - a as f64 / (a + b) as f64).abs() < 1e-9, "({a},{b})");
    }
}

#[test]
fn infinite_birth_without_cap_is_rejected() {
    let spec = NaiveChainSpec::constant(1.0, 1.0, None);
    assert!(solve_naive(&spec, 10).is_err());
    // No deaths at all: nothing is ever absorbed.
    let spec = NaiveChainSpec::constant(1.0, 0.0, Some(8));
    assert!(matches!(solve_naive(&spec, 8), Err(Error::NotAbsorbing { .. })));
}

#[test]
fn dominated_majority_wins_less_often() {
    // A births at least as fast and dies no faster than B.
    let spec = NaiveChainSpec::asymmetric(
        rate(|_, _| 1.0),
        rate(|_, _| 0.8),
        rate(|_, _| 0.7),
        rate(|_, _| 1.0),
        Some(12),
    );
    let sol = solve_naive(&spec, 12).unwrap();
    for (a, b, p) in sol.rows() {
        if b > a {
            let b_wins = 1.0 - p;
            assert!(b_wins <= b as f64 / (a + b) as f64 + 1e-12, "({a},{b}): {b_wins}");
        }
    }
}

fn closed_naive(n: u64, a: u64) -> ConsensusExperiment {
    let mut spec = ProtocolSpec::table1(ProtocolKind::Naive);
    spec.params.gamma1.initial = 100.0;
    spec.params.gamma2.max_rate = 0.0;
    spec.params.gamma2.initial = 0.0;
    spec.params.delta = 0.01;
    ConsensusExperiment::new(spec.build().unwrap(), a, n - a, Some(1e7), None)
}

#[test]
fn estimate_is_independent_of_thread_count() {
    let exp = closed_naive(60, 40);
    let run = |threads| -> EstimateResult {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_consensus_prob(&exp, 64, 99).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.tally.total(), 64);
    assert!(one.ci_lo <= one.p_hat && one.p_hat <= one.ci_hi);
}

#[test]
fn closed_naive_follows_initial_share() {
    let est = estimate_consensus_prob(&closed_naive(200, 150), 2000, 2024).unwrap();
    let se = est.standard_error(0.75);
    assert!((est.p_hat - 0.75).abs() < 3.0 * se, "p_hat {}", est.p_hat);
}

#[test]
fn symmetric_start_is_a_coin_flip() {
    let spec = ProtocolSpec::table1(ProtocolKind::MutualAnnihilation).scaled(2e4 / 3e5);
    let exp = ConsensusExperiment::new(spec.build().unwrap(), 10_000, 10_000, Some(1e6), None);
    let est = estimate_consensus_prob(&exp, 400, 8).unwrap();
    let se = est.standard_error(0.5);
    assert!((est.p_hat - 0.5).abs() < 3.0 * se, "p_hat {}", est.p_hat);
}

#[test]
fn azuma_frozen_values() {
    assert_eq!(azuma_bound(0.0, 5), 1.0);
    assert!((azuma_bound(2.0, 2) - 0.36787944117144233).abs() < 1e-16);
    assert_eq!(consensus_gap(10_000, 4.0), 1214);
}

#[test]
fn annihilation_sweep_is_steeper_than_naive() {
    let config = |kind| SweepConfig {
        protocol: ProtocolSpec::table1(kind).scaled(0.1),
        n: 30_000,
        fractions: (0..=10).map(|i| 0.40 + 0.02 * i as f64).collect(),
        replicates: 10,
        times: vec![120.0],
        seed: 31,
    };
    let ann = gap_sweep(&config(ProtocolKind::MutualAnnihilation)).unwrap();
    let naive = gap_sweep(&config(ProtocolKind::Naive)).unwrap();
    let means: Vec<f64> = ann.iter().map(|r| r.mean_frac_a).collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
    let (k_ann, k_naive) = (sweep_slope(&ann, 120.0), sweep_slope(&naive, 120.0));
    assert!(k_ann > 4.0 * k_naive, "slopes {k_ann} vs {k_naive}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lemma_for_random_symmetric_rates(
        c0 in 0.05f64..2.0, c1 in 0.0f64..0.5, d0 in 0.05f64..2.0, d1 in 0.0f64..0.5, scale in 0.01f64..100.0,
    ) {
        let spec = NaiveChainSpec::symmetric(
            rate(move |a, b| c0 + c1 * (a as f64 - b as f64).abs()),
            rate(move |a, b| d0 + d1 * (a + b) as f64),
            Some(12),
        );
        let base = solve_naive(&spec, 12).unwrap();
        let scaled = solve_naive(&spec.scaled(scale), 12).unwrap();
        prop_assert!(base.residual <= 1e-10);
        for ((a, b, p), (_, _, q)) in base.rows().zip(scaled.rows()) {
            prop_assert!((p - a as f64 / (a + b) as f64).abs() < 1e-9);
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn wilson_interval_contains_estimate(n in 1u64..5000, frac in 0.0f64..=1.0) {
        let s = (frac * n as f64).round() as u64;
        let (lo, hi) = wilson_interval(s, n);
        let p = s as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn azuma_is_monotone(eps in 0.0f64..100.0, d in 0.0f64..10.0, k in 1u64..10_000, dk in 0u64..100) {
        prop_assert!(azuma_bound(eps + d, k) <= azuma_bound(eps, k));
        prop_assert!(azuma_bound(eps, k + dk) >= azuma_bound(eps, k));
    }
}

use brnsim_core::chains::{
    check_dominance, expected_extinction_steps, lb_transition_probs, paper_mchain, simulate_coupling, simulate_mchain,
    LowerBoundingChain, MChainSpec,
};
use brnsim_core::RngStream;
use proptest::prelude::*;

/// Expected extinction time by first-step analysis, solved for the
/// increments `D_m = E_m - E_(m-1)` backwards from a reflecting top state:
/// `q(m) D_m = 1 + p(m) D_(m+1)`.
fn extinction_oracle(spec: &MChainSpec, m0: u64, top: u64) -> f64 {
    let mut next = 0.0;
    let mut d = vec![0.0; top as usize + 1];
    for m in (1..=top).rev() {
        let p = if m == top { 0.0 } else { spec.birth(m) };
        next = (1.0 + p * next) / spec.death(m);
        d[m as usize] = next;
    }
    d[1..=m0 as usize].iter().sum()
}

// Oracle outputs frozen at top = m0 + 4000.
const FROZEN: [(f64, f64, f64, f64, u64, f64); 4] = [
    (1.0, 0.0, 0.0, 1.0, 10, 32.455904581497),
    (1.0, 0.0, 0.0, 1.0, 100, 219.485989484928),
    (0.5, 0.1, 0.05, 0.1, 100, 976.434324495419),
    (0.5, 0.1, 0.05, 0.1, 1000, 2818.623532337528),
];

#[test]
fn series_matches_frozen_oracle() {
    for (g, r, d, a, m0, want) in FROZEN {
        let spec = paper_mchain(g, r, d, a).unwrap();
        let got = expected_extinction_steps(&spec, m0, 1e-13).unwrap();
        assert!((got.value - want).abs() < 1e-11 * want, "{g} {r} {d} {a} m0={m0}: {}", got.value);
        let live = extinction_oracle(&spec, m0, m0 + 4000);
        assert!((live - want).abs() < 1e-11 * want);
        assert!(got.tail_bound <= 1e-13 * got.value * m0 as f64);
    }
}

#[test]
fn ill_conditioned_case_still_matches() {
    let spec = paper_mchain(2.0, 0.3, 0.1, 0.05).unwrap();
    let got = expected_extinction_steps(&spec, 100, 1e-13).unwrap().value;
    let want = extinction_oracle(&spec, 100, 4100);
    assert!(((got - want) / want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn pure_death_collapses_exactly() {
    for c in [0.1, 0.25, 0.5, 1.0] {
        let spec = MChainSpec::constant(0.0, c).unwrap();
        for m in [1u64, 7, 100, 1000] {
            let e = expected_extinction_steps(&spec, m, 1e-12).unwrap();
            assert_eq!(e.value, m as f64 / c);
            assert_eq!(e.tail_bound, 0.0);
        }
    }
}

#[test]
fn monte_carlo_mean_within_three_se() {
    let spec = paper_mchain(1.0, 0.0, 0.0, 1.0).unwrap();
    let exact = expected_extinction_steps(&spec, 100, 1e-12).unwrap().value;
    let runs = 10_000;
    let samples: Vec<f64> = (0..runs)
        .map(|r| {
            let mut rng = RngStream::new(404, r);
            simulate_mchain(&spec, 100, &mut rng, 10_000_000).extinction_steps().unwrap() as f64
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / runs as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    let se = (var / runs as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
}

#[test]
fn violated_spec_is_caught_by_some_seed() {
    let chain = LowerBoundingChain::new(30, 5, 1.0, 0.1, 0.1, 0.2).unwrap();
    // Always stepping down is faster than the chain can follow.
    let spec = MChainSpec::constant(0.0, 1.0).unwrap();
    let witness = (0..200).find(|&s| {
        let mut rng = RngStream::new(s, 0);
        !simulate_coupling(&chain, &spec, 5, &mut rng, 1000).unwrap().ok
    });
    assert!(witness.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dominance_holds_for_positive_rates(
        g in 0.01f64..5.0, r in 0.0f64..2.0, d in 0.0f64..2.0, a in 0.001f64..2.0,
    ) {
        let chain = LowerBoundingChain::with_rates(g, r, d, a).unwrap();
        let spec = paper_mchain(g, r, d, a).unwrap();
        let report = check_dominance(&chain, &spec, 100, 100);
        prop_assert!(report.holds(), "{:?}", report.violations.first());
    }

    #[test]
    fn coupling_keeps_order(
        g in 0.01f64..3.0, r in 0.0f64..1.0, d in 0.0f64..1.0, a in 0.01f64..1.0,
        a0 in 2u64..60, b0 in 1u64..60, seed in any::<u64>(),
    ) {
        prop_assume!(a0 > b0);
        let chain = LowerBoundingChain::new(a0, b0, g, r, d, a).unwrap();
        let spec = paper_mchain(g, r, d, a).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let run = simulate_coupling(&chain, &spec, b0, &mut rng, 3000).unwrap();
        prop_assert!(run.ok);
        prop_assert!(run.min_path.iter().zip(&run.m_path).all(|(x, y)| x <= y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transition_probabilities_are_sane(
        g in 0.0f64..5.0, r in 0.0f64..2.0, d in 0.0f64..2.0, al in 0.001f64..2.0,
        a in 0u64..300, b in 0u64..300,
    ) {
        prop_assume!(a + b > 0);
        let chain = LowerBoundingChain::with_rates(g, r, d, al).unwrap();
        let t = lb_transition_probs(&chain, a, b).unwrap();
        prop_assert!(t.p >= 0.0 && t.q >= 0.0 && t.p + t.q <= 1.0 + 1e-12);
        prop_assert!((t.p + t.q + t.stutter - 1.0).abs() < 1e-12);
        if a <= b {
            prop_assert_eq!(t.p, 0.0);
        }
    }

    #[test]
    fn mchain_probabilities_are_sane(g in 0.01f64..5.0, r in 0.0f64..2.0, d in 0.0f64..2.0, a in 0.001f64..2.0, m in 1u64..100_000) {
        let spec = paper_mchain(g, r, d, a).unwrap();
        let (p, q) = (spec.birth(m), spec.death(m));
        prop_assert!(p > 0.0 && q > 0.0 && p + q <= 1.0 + 1e-12);
        prop_assert!(spec.birth(m + 1) <= p);
        prop_assert!(spec.death(m + 1) >= q);
    }
}

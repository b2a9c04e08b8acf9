use serde::{Deserialize, Serialize};

use crate::brn::{Configuration, SpeciesId};
use crate::error::Result;
use crate::parallel::map_indexed;
use crate::protocols::{classify_outcome, Outcome, OutcomeKind, ProtocolBrn};
use crate::rng::RngStream;
use crate::ssa::{Engine, RecordingPolicy, StopCondition};

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeTally {
    pub majority_wins: u64,
    pub minority_wins: u64,
    pub both_extinct: u64,
    pub timeout: u64,
}

impl OutcomeTally {
    pub fn add(&mut self, kind: OutcomeKind) {
        match kind {
            OutcomeKind::MajorityWins => self.majority_wins += 1,
            OutcomeKind::MinorityWins => self.minority_wins += 1,
            OutcomeKind::BothExtinct => self.both_extinct += 1,
            OutcomeKind::Timeout => self.timeout += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.majority_wins + self.minority_wins + self.both_extinct + self.timeout
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Fraction of replicates won by the initial majority.
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicates: u64,
    pub tally: OutcomeTally,
    pub outcomes: Vec<Outcome>,
}

impl EstimateResult {
    pub fn from_outcomes(outcomes: Vec<Outcome>) -> Self {
        let mut tally = OutcomeTally::default();
        for o in &outcomes {
            tally.add(o.kind);
        }
        let n = outcomes.len() as u64;
        let (ci_lo, ci_hi) = wilson_interval(tally.majority_wins, n);
        Self {
            p_hat: if n == 0 { 0.0 } else { tally.majority_wins as f64 / n as f64 },
            ci_lo,
            ci_hi,
            replicates: n,
            tally,
            outcomes,
        }
    }

    /// Binomial standard error at probability `p`.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }
}

/// A competition run to be replicated.
#[derive(Debug, Clone)]
pub struct ConsensusExperiment {
    pub protocol: ProtocolBrn,
    pub initial: Configuration,
    pub stop: StopCondition,
}

impl ConsensusExperiment {
    /// Start from `(a, b)` and stop at the first extinction among `A`, `B`
    /// or at the given bounds.
    pub fn new(protocol: ProtocolBrn, a: u64, b: u64, max_time: Option<f64>, max_steps: Option<u64>) -> Self {
        let initial = protocol.initial(a, b);
        let stop = StopCondition {
            max_time,
            max_steps,
            extinct_any: vec![protocol.a, protocol.b],
        };
        Self { protocol, initial, stop }
    }

    /// `(majority, minority)`; ties count `A` as the majority.
    pub fn roles(&self) -> (SpeciesId, SpeciesId) {
        let (a, b) = (self.protocol.a, self.protocol.b);
        if self.initial.get(b) > self.initial.get(a) {
            (b, a)
        } else {
            (a, b)
        }
    }

    pub fn run_replicate(&self, seed: u64, replicate: u64) -> Result<Outcome> {
        let mut rng = RngStream::new(seed, replicate);
        let traj = Engine::new(&self.protocol.brn).simulate(&self.initial, &self.stop, &mut rng, &RecordingPolicy::SummaryOnly)?;
        let (maj, min) = self.roles();
        classify_outcome(&traj, maj, min)
    }
}

/// Runs `replicates` independent trajectories addressed by `(seed, i)`.
pub fn estimate_consensus_prob(experiment: &ConsensusExperiment, replicates: u64, seed: u64) -> Result<EstimateResult> {
    let outcomes = map_indexed(replicates, |i| experiment.run_replicate(seed, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateResult::from_outcomes(outcomes))
}

/// Azuma bound `exp(-eps^2 / (2 K))` on the probability that a unit-step
/// submartingale started at `eps` is nonpositive after `K` steps.
pub fn azuma_bound(gap: f64, steps: u64) -> f64 {
    assert!(steps >= 1, "need at least one step");
    assert!(gap >= 0.0, "gap must be nonnegative");
    (-(gap * gap) / (2.0 * steps as f64)).exp()
}

/// `ceil(c * sqrt(n ln n))`.
pub fn consensus_gap(n: u64, c: f64) -> u64 {
    let nf = n as f64;
    (c * (nf * nf.ln()).sqrt()).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn azuma_values() {
        assert_eq!(azuma_bound(0.0, 17), 1.0);
        assert!((azuma_bound(2.0, 2) - (-1.0f64).exp()).abs() < 1e-15);
        let (k, n) = (500u64, 1000.0f64);
        let eps = (2.0 * k as f64 * n.ln()).sqrt();
        assert!((azuma_bound(eps, k) - 1.0 / n).abs() < 1e-15);
    }

    #[test]
    fn azuma_monotone() {
        for k in 1..50u64 {
            for e in 0..50 {
                let e = e as f64 * 0.5;
                assert!(azuma_bound(e + 0.5, k) <= azuma_bound(e, k));
                assert!(azuma_bound(e, k + 1) >= azuma_bound(e, k));
            }
        }
    }

    #[test]
    fn wilson_within_unit_interval() {
        for n in [1u64, 5, 30, 200] {
            for s in 0..=n {
                let (lo, hi) = wilson_interval(s, n);
                let p = s as f64 / n as f64;
                assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
            }
        }
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn gap_formula() {
        assert_eq!(consensus_gap(10_000, 4.0), 1214);
    }
}

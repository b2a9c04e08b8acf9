use serde::{Deserialize, Serialize};

use super::lower_bound::LowerBoundingChain;
use super::mchain::MChainSpec;

/// Slack allowed for rounding when comparing probabilities.
pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `p(c) <= p'(m)`
    BirthBelow,
    /// `q(c) >= q'(m)`
    DeathAbove,
    /// `p(c) <= 1 - q'(m + 1)`
    NoCrossing,
}

impl Condition {
    pub fn number(self) -> u8 {
        match self {
            Condition::BirthBelow => 1,
            Condition::DeathAbove => 2,
            Condition::NoCrossing => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceViolation {
    pub a: u64,
    pub b: u64,
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub a_max: u64,
    pub b_max: u64,
    pub checked: usize,
    pub violations: Vec<DominanceViolation>,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates the three dominance inequalities at every `(a, b)` in
/// `[0, a_max] x [0, b_max]` except the origin.
pub fn check_dominance(chain: &LowerBoundingChain, spec: &MChainSpec, a_max: u64, b_max: u64) -> DominanceReport {
    let mut violations = Vec::new();
    let mut checked = 0;
    for a in 0..=a_max {
        for b in 0..=b_max {
            if a == 0 && b == 0 {
                continue;
            }
            checked += 1;
            let t = chain
                .transition_probs(a, b)
                .expect("origin excluded");
            let m = a.min(b);
            let checks = [
                (Condition::BirthBelow, t.p, spec.birth(m), t.p <= spec.birth(m) + DOMINANCE_TOLERANCE),
                (Condition::DeathAbove, t.q, spec.death(m), t.q + DOMINANCE_TOLERANCE >= spec.death(m)),
                (
                    Condition::NoCrossing,
                    t.p,
                    1.0 - spec.death(m + 1),
                    t.p <= 1.0 - spec.death(m + 1) + DOMINANCE_TOLERANCE,
                ),
            ];
            for (condition, lhs, rhs, ok) in checks {
                if !ok {
                    violations.push(DominanceViolation { a, b, condition, lhs, rhs });
                }
            }
        }
    }
    DominanceReport {
        a_max,
        b_max,
        checked,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::mchain::paper_mchain;

    #[test]
    fn closed_form_dominates() {
        let chain = LowerBoundingChain::with_rates(1.0, 0.2, 0.1, 0.5).unwrap();
        let spec = paper_mchain(1.0, 0.2, 0.1, 0.5).unwrap();
        let report = check_dominance(&chain, &spec, 60, 60);
        assert!(report.holds(), "{:?}", &report.violations[..report.violations.len().min(3)]);
        assert_eq!(report.checked, 61 * 61 - 1);
    }

    #[test]
    fn certain_death_breaks_no_crossing() {
        let chain = LowerBoundingChain::with_rates(1.0, 0.0, 0.0, 1.0).unwrap();
        let spec = MChainSpec::constant(0.0, 1.0).unwrap();
        let report = check_dominance(&chain, &spec, 10, 10);
        let crossing: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.condition == Condition::NoCrossing)
            .collect();
        assert!(!crossing.is_empty());
        for v in crossing {
            assert!(v.lhs > 0.0);
        }
    }

    #[test]
    fn zero_birth_breaks_condition_one() {
        let chain = LowerBoundingChain::with_rates(1.0, 0.1, 0.1, 1.0).unwrap();
        let spec = MChainSpec::constant(0.0, 0.0).unwrap();
        let report = check_dominance(&chain, &spec, 5, 5);
        assert!(report.violations.iter().any(|v| v.condition == Condition::BirthBelow));
        assert!(report
            .violations
            .iter()
            .filter(|v| v.condition == Condition::BirthBelow)
            .all(|v| v.b < v.a));
    }
}

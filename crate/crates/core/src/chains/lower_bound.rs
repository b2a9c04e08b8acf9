use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pessimistic two-species chain: the majority `A` never reproduces, the
/// minority `B` reproduces at the summed maximal birth rate, and there are
/// no resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundingChain {
    pub a0: u64,
    pub b0: u64,
    /// Summed maximal birth rate of the minority.
    pub gamma: f64,
    pub rho_out: f64,
    pub delta: f64,
    pub alpha: f64,
}

/// Probabilities that `min(a, b)` goes up, goes down, or stays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinTransition {
    pub p: f64,
    pub q: f64,
    pub stutter: f64,
}

/// One reaction of the chain: rate and effect on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Move {
    pub rate: f64,
    pub da: i8,
    pub db: i8,
}

pub(crate) const MOVES: usize = 7;

impl LowerBoundingChain {
    pub fn new(a0: u64, b0: u64, gamma: f64, rho_out: f64, delta: f64, alpha: f64) -> Result<Self> {
        if a0 <= b0 {
            return Err(Error::InvalidParameter(format!("need a0 > b0, got a0 = {a0}, b0 = {b0}")));
        }
        for (name, v) in [("gamma", gamma), ("rho_out", rho_out), ("delta", delta)] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be > 0")));
        }
        Ok(Self {
            a0,
            b0,
            gamma,
            rho_out,
            delta,
            alpha,
        })
    }

    /// Chain for a given parameter set, ignoring the initial state.
    pub fn with_rates(gamma: f64, rho_out: f64, delta: f64, alpha: f64) -> Result<Self> {
        Self::new(1, 0, gamma, rho_out, delta, alpha)
    }

    pub(crate) fn moves(&self, a: u64, b: u64) -> [Move; MOVES] {
        let (af, bf) = (a as f64, b as f64);
        let kill = af * bf * self.alpha;
        [
            Move { rate: bf * self.gamma, da: 0, db: 1 },
            Move { rate: af * self.rho_out, da: -1, db: 0 },
            Move { rate: af * self.delta, da: -1, db: 0 },
            Move { rate: bf * self.rho_out, da: 0, db: -1 },
            Move { rate: bf * self.delta, da: 0, db: -1 },
            // A + B -> A
            Move { rate: kill, da: 0, db: -1 },
            // A + B -> B
            Move { rate: kill, da: -1, db: 0 },
        ]
    }

    /// Change of `min(a, b)` caused by a move.
    pub(crate) fn min_delta(a: u64, b: u64, mv: &Move) -> i64 {
        let na = a as i64 + mv.da as i64;
        let nb = b as i64 + mv.db as i64;
        na.min(nb) - (a.min(b) as i64)
    }

    /// Exact `p`, `q` for the minimum of the lower-bounding chain at `(a, b)`.
    ///
    /// Off the diagonal this is `p = b Gamma / D` and
    /// `q = (m rho + m delta + a b alpha) / D` with
    /// `D = (a + b) rho + b Gamma + (a + b) delta + 2 a b alpha`; when
    /// `a <= b`, `p = 0`. At `a = b` a loss on either side lowers the
    /// minimum, so `q` counts both.
    pub fn transition_probs(&self, a: u64, b: u64) -> Result<MinTransition> {
        if a == 0 && b == 0 {
            return Err(Error::BothZero);
        }
        let moves = self.moves(a, b);
        let total: f64 = moves.iter().map(|m| m.rate).sum();
        if total <= 0.0 {
            return Ok(MinTransition { p: 0.0, q: 0.0, stutter: 1.0 });
        }
        let (mut up, mut down) = (0.0, 0.0);
        for mv in &moves {
            match Self::min_delta(a, b, mv) {
                1 => up += mv.rate,
                -1 => down += mv.rate,
                _ => {}
            }
        }
        let p = up / total;
        let q = down / total;
        Ok(MinTransition {
            p,
            q,
            stutter: (1.0 - p - q).max(0.0),
        })
    }
}

pub fn lb_transition_probs(chain: &LowerBoundingChain, a: u64, b: u64) -> Result<MinTransition> {
    chain.transition_probs(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_case() {
        let chain = LowerBoundingChain::new(2, 1, 1.0, 0.0, 0.0, 1.0).unwrap();
        let t = chain.transition_probs(2, 1).unwrap();
        assert!((t.p - 0.2).abs() < 1e-15);
        assert!((t.q - 0.4).abs() < 1e-15);
        assert!((t.stutter - 0.4).abs() < 1e-15);
    }

    #[test]
    fn minority_zero_is_frozen() {
        let chain = LowerBoundingChain::with_rates(1.0, 0.3, 0.2, 1.0).unwrap();
        let t = chain.transition_probs(5, 0).unwrap();
        assert_eq!((t.p, t.q), (0.0, 0.0));
        let t = chain.transition_probs(0, 5).unwrap();
        assert_eq!((t.p, t.q), (0.0, 0.0));
        assert_eq!(chain.transition_probs(0, 0), Err(Error::BothZero));
    }

    #[test]
    fn tie_has_no_minimum_increase() {
        let chain = LowerBoundingChain::with_rates(1.0, 0.3, 0.2, 1.0).unwrap();
        for a in 1..20 {
            assert_eq!(chain.transition_probs(a, a).unwrap().p, 0.0);
        }
    }

    #[test]
    fn matches_closed_forms_off_diagonal() {
        let (g, r, d, al) = (0.7, 0.11, 0.05, 0.02);
        let chain = LowerBoundingChain::with_rates(g, r, d, al).unwrap();
        for a in 0..30u64 {
            for b in 0..30u64 {
                if a + b == 0 || a == b {
                    continue;
                }
                let (af, bf) = (a as f64, b as f64);
                let denom = (af + bf) * r + bf * g + (af + bf) * d + 2.0 * af * bf * al;
                let t = chain.transition_probs(a, b).unwrap();
                let (p, q) = if b < a {
                    (bf * g / denom, (bf * r + bf * d + af * bf * al) / denom)
                } else {
                    (0.0, (af * r + af * d + af * bf * al) / denom)
                };
                assert!((t.p - p).abs() < 1e-14, "p at ({a},{b})");
                assert!((t.q - q).abs() < 1e-14, "q at ({a},{b})");
            }
        }
    }

    #[test]
    fn constructor_checks() {
        assert!(LowerBoundingChain::new(3, 3, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(LowerBoundingChain::new(3, 1, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LowerBoundingChain::new(3, 1, -1.0, 0.0, 0.0, 1.0).is_err());
    }
}

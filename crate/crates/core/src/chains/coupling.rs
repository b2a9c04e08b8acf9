use serde::{Deserialize, Serialize};

use super::lower_bound::{LowerBoundingChain, Move, MOVES};
use super::mchain::{mchain_move, MChainSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    /// `min(a, b)` of the lower-bounding chain, one entry per step.
    pub min_path: Vec<u64>,
    pub m_path: Vec<u64>,
    /// Whether `min_path[k] <= m_path[k]` held at every recorded step.
    pub ok: bool,
    /// Steps actually simulated; paths stop early once both sides sit at 0.
    pub steps: u64,
}

/// Drives the lower-bounding chain and an M-chain from one uniform per step.
///
/// With `u` the step's uniform, the minimum rises on `[0, p)`, falls on
/// `[1 - q, 1)` and otherwise stays; the M-chain uses the same rule with
/// `p'`, `q'`. The concrete lower-bounding move is then drawn from the
/// chosen class in proportion to its rate with a second uniform.
pub fn simulate_coupling(
    chain: &LowerBoundingChain,
    spec: &MChainSpec,
    m0: u64,
    rng: &mut RngStream,
    horizon: u64,
) -> Result<CouplingRun> {
    let (mut a, mut b) = (chain.a0, chain.b0);
    if a.min(b) > m0 {
        return Err(Error::InvalidParameter(format!(
            "initial minimum {} exceeds M-chain start {m0}",
            a.min(b)
        )));
    }
    let mut m = m0;
    let mut min_path = vec![a.min(b)];
    let mut m_path = vec![m];
    let mut ok = true;
    let mut steps = 0;

    while steps < horizon {
        if a.min(b) == 0 && m == 0 {
            break;
        }
        let u = rng.uniform();
        let v = rng.uniform();

        let moves = chain.moves(a, b);
        let mut class_rate = [0.0f64; 3];
        let mut class_of = [0usize; MOVES];
        for (i, mv) in moves.iter().enumerate() {
            let c = (LowerBoundingChain::min_delta(a, b, mv) + 1) as usize;
            class_of[i] = c;
            class_rate[c] += mv.rate;
        }
        let total: f64 = class_rate.iter().sum();
        if total > 0.0 {
            let p = class_rate[2] / total;
            let q = class_rate[0] / total;
            let class = if u < p {
                2
            } else if u >= 1.0 - q {
                0
            } else {
                1
            };
            if let Some(mv) = pick(&moves, &class_of, class, class_rate[class], v) {
                a = (a as i64 + mv.da as i64) as u64;
                b = (b as i64 + mv.db as i64) as u64;
            }
        }
        m = mchain_move(spec, m, u);
        steps += 1;

        let min = a.min(b);
        ok &= min <= m;
        min_path.push(min);
        m_path.push(m);
    }

    Ok(CouplingRun {
        min_path,
        m_path,
        ok,
        steps,
    })
}

fn pick<'m>(moves: &'m [Move; MOVES], class_of: &[usize; MOVES], class: usize, class_total: f64, v: f64) -> Option<&'m Move> {
    if class_total <= 0.0 {
        return None;
    }
    let target = v * class_total;
    let mut acc = 0.0;
    let mut last = None;
    for (mv, &c) in moves.iter().zip(class_of) {
        if c == class && mv.rate > 0.0 {
            acc += mv.rate;
            last = Some(mv);
            if acc > target {
                return last;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::mchain::paper_mchain;

    #[test]
    fn dominating_pair_stays_ordered() {
        let chain = LowerBoundingChain::new(30, 20, 1.0, 0.1, 0.1, 0.2).unwrap();
        let spec = paper_mchain(1.0, 0.1, 0.1, 0.2).unwrap();
        for seed in 0..200 {
            let mut rng = RngStream::new(seed, 0);
            let run = simulate_coupling(&chain, &spec, 20, &mut rng, 10_000).unwrap();
            assert!(run.ok, "seed {seed}");
            assert_eq!(run.min_path.len(), run.m_path.len());
        }
    }

    #[test]
    fn frozen_at_zero() {
        let chain = LowerBoundingChain::new(5, 0, 1.0, 0.1, 0.1, 0.2).unwrap();
        let spec = paper_mchain(1.0, 0.1, 0.1, 0.2).unwrap();
        let mut rng = RngStream::new(1, 0);
        let run = simulate_coupling(&chain, &spec, 0, &mut rng, 100).unwrap();
        assert!(run.ok);
        assert_eq!(run.steps, 0);
        assert_eq!(run.min_path, vec![0]);
    }

    #[test]
    fn too_aggressive_death_breaks_order() {
        let chain = LowerBoundingChain::new(12, 5, 1.0, 0.0, 0.0, 0.05).unwrap();
        let spec = MChainSpec::constant(0.0, 1.0).unwrap();
        let broken = (0..50).any(|seed| {
            let mut rng = RngStream::new(seed, 0);
            !simulate_coupling(&chain, &spec, 6, &mut rng, 1_000).unwrap().ok
        });
        assert!(broken);
    }

    #[test]
    fn start_above_m_is_rejected() {
        let chain = LowerBoundingChain::new(12, 5, 1.0, 0.0, 0.0, 0.05).unwrap();
        let spec = MChainSpec::constant(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(simulate_coupling(&chain, &spec, 4, &mut rng, 10).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Birth/death probability functions `p'(m)`, `q'(m)` of a scalar
/// birth-death chain on the naturals, absorbing at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MChainSpec {
    /// `p'(m) = m G / (2 m rho + m G + 2 m delta + 2 m^2 alpha)` and
    /// `q'(m) = min(1 - P, m^2 alpha / (same denominator))` with `P = p'(1)`.
    Annihilation {
        gamma: f64,
        rho_out: f64,
        delta: f64,
        alpha: f64,
    },
    /// `p'(m) = birth`, `q'(m) = death` for every `m >= 1`.
    Constant { birth: f64, death: f64 },
    /// Explicit values for `m = 0..len`; the last entry extends to infinity.
    Table { birth: Vec<f64>, death: Vec<f64> },
}

impl MChainSpec {
    pub fn constant(birth: f64, death: f64) -> Result<Self> {
        let spec = MChainSpec::Constant { birth, death };
        spec.check_at(1)?;
        Ok(spec)
    }

    pub fn table(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        if birth.len() != death.len() || birth.len() < 2 {
            return Err(Error::InvalidParameter(
                "birth and death tables need equal length >= 2".into(),
            ));
        }
        if birth[0] != 0.0 || death[0] != 0.0 {
            return Err(Error::InvalidParameter("state 0 must be absorbing".into()));
        }
        let spec = MChainSpec::Table { birth, death };
        if let MChainSpec::Table { birth, .. } = &spec {
            for m in 1..birth.len() as u64 {
                spec.check_at(m)?;
            }
        }
        Ok(spec)
    }

    fn check_at(&self, m: u64) -> Result<()> {
        let (p, q) = (self.birth(m), self.death(m));
        if !(p >= 0.0 && q >= 0.0 && p + q <= 1.0 + 1e-15) {
            return Err(Error::InvalidParameter(format!(
                "p'({m}) = {p}, q'({m}) = {q} do not form a distribution"
            )));
        }
        Ok(())
    }

    /// Largest birth probability, attained at `m = 1` for the annihilation form.
    pub fn max_birth(&self) -> f64 {
        match self {
            MChainSpec::Annihilation { gamma, rho_out, delta, alpha } => {
                gamma / (2.0 * rho_out + gamma + 2.0 * delta + 2.0 * alpha)
            }
            MChainSpec::Constant { birth, .. } => *birth,
            MChainSpec::Table { birth, .. } => birth.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn birth(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        match self {
            MChainSpec::Annihilation { gamma, rho_out, delta, alpha } => {
                // m cancels from numerator and denominator
                gamma / (2.0 * rho_out + gamma + 2.0 * delta + 2.0 * m as f64 * alpha)
            }
            MChainSpec::Constant { birth, .. } => *birth,
            MChainSpec::Table { birth, .. } => birth[(m as usize).min(birth.len() - 1)],
        }
    }

    pub fn death(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        match self {
            MChainSpec::Annihilation { gamma, rho_out, delta, alpha } => {
                let mf = m as f64;
                let kill = mf * alpha / (2.0 * rho_out + gamma + 2.0 * delta + 2.0 * mf * alpha);
                kill.min(1.0 - self.max_birth())
            }
            MChainSpec::Constant { death, .. } => *death,
            MChainSpec::Table { death, .. } => death[(m as usize).min(death.len() - 1)],
        }
    }

    /// Upper bound on `p'(i) / q'(i + 1)` over all `i >= k`, or `None` when a
    /// zero death probability makes the ratio unbounded.
    pub fn ratio_sup_from(&self, k: u64) -> Option<f64> {
        let ratio = |i: u64| {
            let q = self.death(i + 1);
            let p = self.birth(i);
            if p == 0.0 {
                Some(0.0)
            } else if q > 0.0 {
                Some(p / q)
            } else {
                None
            }
        };
        match self {
            // p' is nonincreasing and q' nondecreasing in m >= 1
            MChainSpec::Annihilation { .. } | MChainSpec::Constant { .. } => ratio(k.max(1)),
            MChainSpec::Table { birth, .. } => {
                let last = birth.len() as u64 - 1;
                let mut sup = 0.0f64;
                for i in k..=last.max(k) {
                    sup = sup.max(ratio(i)?);
                }
                Some(sup)
            }
        }
    }
}

/// The closed-form dominating chain for the lower-bounding chain with the
/// given rates.
pub fn paper_mchain(gamma: f64, rho_out: f64, delta: f64, alpha: f64) -> Result<MChainSpec> {
    if !(alpha > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParameter("alpha and gamma must be > 0".into()));
    }
    if !(rho_out >= 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter("rho_out and delta must be >= 0".into()));
    }
    Ok(MChainSpec::Annihilation { gamma, rho_out, delta, alpha })
}

/// One step of the walk driven by the uniform `u`: up on `[0, p')`, down on
/// `[1 - q', 1)`.
pub(crate) fn mchain_move(spec: &MChainSpec, m: u64, u: f64) -> u64 {
    if m == 0 {
        return 0;
    }
    if u < spec.birth(m) {
        m + 1
    } else if u >= 1.0 - spec.death(m) {
        m - 1
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MChainRun {
    Extinct { steps: u64 },
    Timeout { steps: u64, state: u64 },
}

impl MChainRun {
    pub fn extinction_steps(&self) -> Option<u64> {
        match self {
            MChainRun::Extinct { steps } => Some(*steps),
            MChainRun::Timeout { .. } => None,
        }
    }
}

pub fn simulate_mchain(spec: &MChainSpec, m0: u64, rng: &mut RngStream, max_steps: u64) -> MChainRun {
    let mut m = m0;
    let mut steps = 0;
    while m > 0 {
        if steps >= max_steps {
            return MChainRun::Timeout { steps, state: m };
        }
        m = mchain_move(spec, m, rng.uniform());
        steps += 1;
    }
    MChainRun::Extinct { steps }
}

/// State after exactly `k` steps (0 stays 0).
pub fn mchain_state_after(spec: &MChainSpec, m0: u64, rng: &mut RngStream, k: u64) -> u64 {
    let mut m = m0;
    for _ in 0..k {
        m = mchain_move(spec, m, rng.uniform());
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionSteps {
    pub value: f64,
    /// Certified bound on the truncated tail mass, `<= tol * value`.
    pub tail_bound: f64,
}

/// Expected number of steps until extinction from `m0`:
/// `sum_{j=1}^{m0} sum_{k=j-1}^inf p'(j)..p'(k) / (q'(j)..q'(k+1))`.
///
/// Each inner series is cut once its geometric tail certificate falls below
/// `tol` times its partial sum.
pub fn expected_extinction_steps(spec: &MChainSpec, m0: u64, tol: f64) -> Result<ExtinctionSteps> {
    const MAX_TERMS: u64 = 10_000_000;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol} must be > 0")));
    }
    let mut value = 0.0;
    let mut tail_bound = 0.0;
    for j in 1..=m0 {
        let qj = spec.death(j);
        if !(qj > 0.0) {
            return Err(Error::NonConvergent(format!("q'({j}) = 0")));
        }
        let mut term = 1.0 / qj;
        let mut sum = term;
        let mut k = j;
        let tail = loop {
            let p = spec.birth(k);
            if p == 0.0 {
                break 0.0;
            }
            let q_next = spec.death(k + 1);
            if !(q_next > 0.0) {
                return Err(Error::NonConvergent(format!("q'({}) = 0", k + 1)));
            }
            term *= p / q_next;
            sum += term;
            k += 1;
            if let Some(rho) = spec.ratio_sup_from(k) {
                if rho < 1.0 {
                    let tail = term * rho / (1.0 - rho);
                    if tail <= tol * sum {
                        break tail;
                    }
                }
            }
            if k - j > MAX_TERMS {
                return Err(Error::NonConvergent(format!(
                    "ratio p'/q' stays >= 1 beyond m = {k} (inner series for j = {j})"
                )));
            }
        };
        value += sum;
        tail_bound += tail;
    }
    Ok(ExtinctionSteps { value, tail_bound })
}

//! Exact win probabilities for two competing birth-death populations
//! without direct interaction.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-cell rate as a function of the current counts `(a, b)`.
pub type RateFn = Arc<dyn Fn(u64, u64) -> f64 + Send + Sync>;

/// Largest number of unknowns the dense solve accepts.
pub const MAX_STATES: usize = 4096;

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Time-homogeneous per-cell birth and death rates of species `A` and `B`.
///
/// With `cap = Some(n)` births are disabled once `a + b = n`, which makes
/// the state space finite.
#[derive(Clone)]
pub struct NaiveChainSpec {
    pub birth_a: RateFn,
    pub death_a: RateFn,
    pub birth_b: RateFn,
    pub death_b: RateFn,
    pub symmetric: bool,
    pub cap: Option<u64>,
}

impl fmt::Debug for NaiveChainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NaiveChainSpec")
            .field("symmetric", &self.symmetric)
            .field("cap", &self.cap)
            .finish_non_exhaustive()
    }
}

impl NaiveChainSpec {
    /// Both species share the same per-cell rates.
    pub fn symmetric(birth: RateFn, death: RateFn, cap: Option<u64>) -> Self {
        Self {
            birth_a: birth.clone(),
            death_a: death.clone(),
            birth_b: birth,
            death_b: death,
            symmetric: true,
            cap,
        }
    }

    pub fn asymmetric(birth_a: RateFn, death_a: RateFn, birth_b: RateFn, death_b: RateFn, cap: Option<u64>) -> Self {
        Self {
            birth_a,
            death_a,
            birth_b,
            death_b,
            symmetric: false,
            cap,
        }
    }

    pub fn constant(birth: f64, death: f64, cap: Option<u64>) -> Self {
        Self::symmetric(Arc::new(move |_, _| birth), Arc::new(move |_, _| death), cap)
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |f: &RateFn| -> RateFn {
            let f = f.clone();
            Arc::new(move |a, b| factor * f(a, b))
        };
        Self {
            birth_a: s(&self.birth_a),
            death_a: s(&self.death_a),
            birth_b: s(&self.birth_b),
            death_b: s(&self.death_b),
            symmetric: self.symmetric,
            cap: self.cap,
        }
    }

    /// Total rates `[A birth, A death, B birth, B death]` at `(a, b)`.
    pub fn rates(&self, a: u64, b: u64) -> [f64; 4] {
        let births_on = self.cap.is_none_or(|n| a + b < n);
        let (af, bf) = (a as f64, b as f64);
        let birth = |f: &RateFn| if births_on { f(a, b).max(0.0) } else { 0.0 };
        [
            af * birth(&self.birth_a),
            af * (self.death_a)(a, b).max(0.0),
            bf * birth(&self.birth_b),
            bf * (self.death_b)(a, b).max(0.0),
        ]
    }
}

/// Probability that `B` dies out first, for every state with `a + b <= max_total`.
#[derive(Debug, Clone)]
pub struct NaiveSolution {
    pub max_total: u64,
    values: Vec<f64>,
    /// Largest recurrence residual over interior states.
    pub residual: f64,
}

impl NaiveSolution {
    fn index(a: u64, b: u64) -> usize {
        let t = a + b;
        (t * (t + 1) / 2 + b) as usize
    }

    /// `None` for the origin or for states outside the solved range.
    pub fn get(&self, a: u64, b: u64) -> Option<f64> {
        if a + b == 0 || a + b > self.max_total {
            return None;
        }
        Some(self.values[Self::index(a, b)])
    }

    /// `(a, b, p)` rows ordered by total population then by `b`.
    pub fn rows(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        (1..=self.max_total).flat_map(move |t| (0..=t).map(move |b| (t - b, b, self.values[Self::index(t - b, b)])))
    }
}

const NEIGHBOURS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Solves the absorbing chain over all states with `a + b <= N`, where `N`
/// is the cap, or `max_total` when the chain is birth-free.
pub fn solve_naive(spec: &NaiveChainSpec, max_total: u64) -> Result<NaiveSolution> {
    let n = match spec.cap {
        Some(cap) => cap.max(max_total),
        None => max_total,
    };
    if n == 0 {
        return Err(Error::InvalidParameter("need a + b >= 1".into()));
    }
    let states = ((n + 1) * (n + 2) / 2) as usize;
    let mut values = vec![0.0; states];
    for t in 1..=n {
        values[NaiveSolution::index(t, 0)] = 1.0;
    }

    let birth_free = (1..=n).all(|t| (1..t).all(|b| {
        let r = spec.rates(t - b, b);
        r[0] == 0.0 && r[2] == 0.0
    }));
    if spec.cap.is_none() && !birth_free {
        return Err(Error::InvalidParameter(
            "births without a population cap give an unbounded state space".into(),
        ));
    }
    check_absorbing(spec, n)?;

    if birth_free {
        for t in 2..=n {
            for b in 1..t {
                let a = t - b;
                let r = spec.rates(a, b);
                let out = r[1] + r[3];
                values[NaiveSolution::index(a, b)] = (r[1] * values[NaiveSolution::index(a - 1, b)]
                    + r[3] * values[NaiveSolution::index(a, b - 1)])
                    / out;
            }
        }
    } else {
        solve_linear(spec, n, &mut values)?;
    }

    let residual = residual(spec, n, &values);
    if residual > RESIDUAL_TOLERANCE {
        return Err(Error::Solver(format!("residual {residual:e} above tolerance")));
    }
    Ok(NaiveSolution {
        max_total: n,
        values,
        residual,
    })
}

/// Probability that `B` goes extinct before `A`, from `(a, b)`.
pub fn exact_naive_win_prob(spec: &NaiveChainSpec, a: u64, b: u64) -> Result<f64> {
    if a + b == 0 {
        return Err(Error::BothZero);
    }
    if let Some(cap) = spec.cap {
        if a + b > cap {
            return Err(Error::InvalidParameter(format!("state ({a}, {b}) above cap {cap}")));
        }
    }
    let sol = solve_naive(spec, a + b)?;
    Ok(sol.get(a, b).expect("state within range"))
}

fn interior_index(n: u64) -> (Vec<(u64, u64)>, impl Fn(u64, u64) -> Option<usize>) {
    let mut list = Vec::new();
    for t in 2..=n {
        for b in 1..t {
            list.push((t - b, b));
        }
    }
    // position of (a, b) in `list`
    let lookup = move |a: u64, b: u64| {
        if a == 0 || b == 0 || a + b > n {
            return None;
        }
        let t = a + b;
        // totals 2..t-1 contribute 1 + 2 + ... + (t - 2) states
        Some(((t - 2) * (t - 1) / 2 + (b - 1)) as usize)
    };
    (list, lookup)
}

fn step_to(a: u64, b: u64, (da, db): (i64, i64)) -> (u64, u64) {
    ((a as i64 + da) as u64, (b as i64 + db) as u64)
}

/// Every interior state must reach the boundary through positive-rate moves.
fn check_absorbing(spec: &NaiveChainSpec, n: u64) -> Result<()> {
    let (list, lookup) = interior_index(n);
    let mut reaches = vec![false; list.len()];
    // reversed edges: predecessor lists
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); list.len()];
    let mut queue = VecDeque::new();
    for (i, &(a, b)) in list.iter().enumerate() {
        let r = spec.rates(a, b);
        for (&rate, dir) in r.iter().zip(NEIGHBOURS) {
            if rate <= 0.0 {
                continue;
            }
            let (na, nb) = step_to(a, b, dir);
            match lookup(na, nb) {
                Some(j) => preds[j].push(i),
                None => {
                    if !reaches[i] {
                        reaches[i] = true;
                        queue.push_back(i);
                    }
                }
            }
        }
    }
    while let Some(j) = queue.pop_front() {
        for &i in &preds[j] {
            if !reaches[i] {
                reaches[i] = true;
                queue.push_back(i);
            }
        }
    }
    match reaches.iter().position(|&r| !r) {
        Some(i) => Err(Error::NotAbsorbing { a: list[i].0, b: list[i].1 }),
        None => Ok(()),
    }
}

fn solve_linear(spec: &NaiveChainSpec, n: u64, values: &mut [f64]) -> Result<()> {
    let (list, lookup) = interior_index(n);
    let k = list.len();
    if k > MAX_STATES {
        return Err(Error::StateSpaceTooLarge { states: k });
    }
    let mut matrix = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (i, &(a, b)) in list.iter().enumerate() {
        let r = spec.rates(a, b);
        let total: f64 = r.iter().sum();
        matrix[(i, i)] = 1.0;
        for (rate, dir) in r.iter().zip(NEIGHBOURS) {
            if *rate <= 0.0 {
                continue;
            }
            let w = rate / total;
            let (na, nb) = step_to(a, b, dir);
            match lookup(na, nb) {
                Some(j) => matrix[(i, j)] -= w,
                None => rhs[i] += w * values[NaiveSolution::index(na, nb)],
            }
        }
    }
    let solution = matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular system".into()))?;
    for (i, &(a, b)) in list.iter().enumerate() {
        values[NaiveSolution::index(a, b)] = solution[i];
    }
    Ok(())
}

/// Largest `|P(s) - sum_s' P(s, s') P(s')|` over interior states.
fn residual(spec: &NaiveChainSpec, n: u64, values: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for t in 2..=n {
        for b in 1..t {
            let a = t - b;
            let r = spec.rates(a, b);
            let total: f64 = r.iter().sum();
            let mut rhs = 0.0;
            for (rate, dir) in r.iter().zip(NEIGHBOURS) {
                if *rate > 0.0 {
                    let (na, nb) = step_to(a, b, dir);
                    rhs += rate / total * values[NaiveSolution::index(na, nb)];
                }
            }
            worst = worst.max((values[NaiveSolution::index(a, b)] - rhs).abs());
        }
    }
    worst
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::protocols::{ProtocolBrn, ProtocolSpec};
use crate::rng::{derive_seed, RngStream};
use crate::ssa::{Engine, RecordingPolicy, StopCondition};

pub const SWEEP_HEADER: &str = "fraction_init,time_min,mean_frac_A,min_frac_A,max_frac_A,replicates";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub protocol: ProtocolSpec,
    /// Total initial cell count `A + B`.
    pub n: u64,
    pub fractions: Vec<f64>,
    pub replicates: u64,
    /// Snapshot times in minutes, ascending.
    pub times: Vec<f64>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn check(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidParameter(format!("fraction {f} outside [0, 1]")));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter("snapshot times must be finite and >= 0".into()));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("snapshot times must be ascending".into()));
        }
        Ok(())
    }

    /// `(A, B)` for the `i`-th fraction.
    pub fn initial_counts(&self, i: usize) -> (u64, u64) {
        let a = (self.fractions[i] * self.n as f64).round() as u64;
        (a.min(self.n), self.n - a.min(self.n))
    }

    /// Seed of the sweep point `i`; replicate `r` then uses stream `(point_seed(i), r)`.
    pub fn point_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, i as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction_init: f64,
    pub time_min: f64,
    pub mean_frac_a: f64,
    pub min_frac_a: f64,
    pub max_frac_a: f64,
    /// Replicates with `A + B > 0` at the snapshot.
    pub replicates: u64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.fraction_init, self.time_min, self.mean_frac_a, self.min_frac_a, self.max_frac_a, self.replicates
        )
    }
}

/// `A / (A + B)` at every snapshot time, `None` when both are gone.
fn replicate_fractions(
    config: &SweepConfig,
    protocol: &ProtocolBrn,
    point: usize,
    replicate: u64,
) -> Result<Vec<Option<f64>>> {
    let (a0, b0) = config.initial_counts(point);
    let initial = protocol.initial(a0, b0);
    let t_end = *config.times.last().expect("checked non-empty");
    // Once either type is gone the fraction is frozen.
    let stop = StopCondition::max_time(t_end).or_extinct(&[protocol.a, protocol.b]);
    let mut rng = RngStream::new(config.point_seed(point), replicate);
    let record = RecordingPolicy::Snapshots(config.times.clone());
    let traj = Engine::new(&protocol.brn).simulate(&initial, &stop, &mut rng, &record)?;
    let frac = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    let (fa, fb) = (traj.final_config.get(protocol.a), traj.final_config.get(protocol.b));
    Ok(config
        .times
        .iter()
        .enumerate()
        .map(|(k, _)| match traj.snapshots.get(k) {
            Some(s) => frac(s.config.get(protocol.a), s.config.get(protocol.b)),
            None => frac(fa, fb),
        })
        .collect())
}

/// Runs every `(fraction, replicate)` pair and aggregates per snapshot time.
/// Rows are ordered by fraction, then time.
pub fn gap_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.check()?;
    let protocol = config.protocol.build()?;
    let reps = config.replicates;
    let jobs = config.fractions.len() as u64 * reps;
    let results = map_indexed(jobs, |j| replicate_fractions(config, &protocol, (j / reps) as usize, j % reps))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(config.fractions.len() * config.times.len());
    for (i, &fraction_init) in config.fractions.iter().enumerate() {
        let point = &results[i * reps as usize..(i + 1) * reps as usize];
        for (k, &time_min) in config.times.iter().enumerate() {
            let values: Vec<f64> = point.iter().filter_map(|r| r[k]).collect();
            let count = values.len() as u64;
            let (mean, lo, hi) = if values.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (
                    values.iter().sum::<f64>() / count as f64,
                    values.iter().copied().fold(f64::INFINITY, f64::min),
                    values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            };
            rows.push(SweepRow {
                fraction_init,
                time_min,
                mean_frac_a: mean,
                min_frac_a: lo,
                max_frac_a: hi,
                replicates: count,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

fn logistic_sse(points: &[(f64, f64)], centre: f64, k: f64) -> f64 {
    points
        .iter()
        .map(|&(x, y)| {
            let f = 1.0 / (1.0 + (-k * (x - centre)).exp());
            (f - y).powi(2)
        })
        .sum()
}

/// Least-squares slope `k` of `1 / (1 + exp(-k (x - centre)))` through the
/// points, searched over `k` in `[0, k_max]`.
pub fn fit_logistic_slope(points: &[(f64, f64)], centre: f64, k_max: f64) -> f64 {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let grid = 400;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=grid {
        let k = k_max * i as f64 / grid as f64;
        let e = logistic_sse(&finite, centre, k);
        if e < best.0 {
            best = (e, k);
        }
    }
    let step = k_max / grid as f64;
    let (mut lo, mut hi) = ((best.1 - step).max(0.0), (best.1 + step).min(k_max));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if logistic_sse(&finite, centre, x1) <= logistic_sse(&finite, centre, x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

/// Logistic slope of the mean fraction at `time_min`.
pub fn sweep_slope(rows: &[SweepRow], time_min: f64) -> f64 {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.time_min == time_min)
        .map(|r| (r.fraction_init, r.mean_frac_a))
        .collect();
    fit_logistic_slope(&points, 0.5, 2000.0)
}

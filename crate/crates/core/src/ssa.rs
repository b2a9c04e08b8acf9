//! Direct-method stochastic simulation of a [`Brn`] and its embedded jump chain.

use serde::{Deserialize, Serialize};

use crate::brn::{Brn, Configuration, SpeciesId};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub reaction_index: usize,
    pub config_after: Configuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub config: Configuration,
}

/// When a simulation stops. Absorption (total propensity 0) always stops it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCondition {
    pub max_time: Option<f64>,
    pub max_steps: Option<u64>,
    /// Stop as soon as any of these species reaches 0.
    pub extinct_any: Vec<SpeciesId>,
}

impl StopCondition {
    pub fn max_time(t: f64) -> Self {
        Self {
            max_time: Some(t),
            max_steps: None,
            extinct_any: Vec::new(),
        }
    }

    pub fn max_steps(n: u64) -> Self {
        Self {
            max_time: None,
            max_steps: Some(n),
            extinct_any: Vec::new(),
        }
    }

    pub fn or_steps(mut self, n: u64) -> Self {
        self.max_steps = Some(n);
        self
    }

    pub fn or_time(mut self, t: f64) -> Self {
        self.max_time = Some(t);
        self
    }

    pub fn or_extinct(mut self, species: &[SpeciesId]) -> Self {
        self.extinct_any.extend_from_slice(species);
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.max_time.is_none() && self.max_steps.is_none() {
            return Err(Error::InvalidParameter(
                "stop condition needs max_time or max_steps".into(),
            ));
        }
        if let Some(t) = self.max_time {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("max_time {t} is negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cause", content = "species")]
pub enum Termination {
    MaxTime,
    MaxSteps,
    SpeciesExtinct(usize),
    Absorbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RecordingPolicy {
    /// Every event with its resulting configuration.
    Full,
    /// State at the given (ascending) times.
    Snapshots(Vec<f64>),
    SummaryOnly,
}

impl RecordingPolicy {
    /// Snapshots at `0, dt, 2 dt, ...` up to and including `t_end`.
    pub fn every(dt: f64, t_end: f64) -> Self {
        let n = (t_end / dt + 1e-9).floor() as usize;
        RecordingPolicy::Snapshots((0..=n).map(|i| i as f64 * dt).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub snapshots: Vec<Snapshot>,
    pub final_config: Configuration,
    pub final_time: f64,
    pub termination: Termination,
    pub rng_seed: u64,
    pub replicate: u64,
    pub step_count: u64,
    /// Applications per reaction index.
    pub reaction_counts: Vec<u64>,
    /// First time each species was at count 0, if ever.
    pub extinction_times: Vec<Option<f64>>,
}

impl Trajectory {
    /// Re-applies the recorded events from `initial` and checks every
    /// recorded configuration.
    pub fn replay(&self, brn: &Brn) -> Result<bool> {
        let mut config = self.initial.clone();
        for event in &self.events {
            brn.apply_in_place(event.reaction_index, &mut config)?;
            if config != event.config_after {
                return Ok(false);
            }
        }
        Ok(self.events.is_empty() || config == self.final_config)
    }
}

/// Reusable propensity buffer for one network.
#[derive(Debug)]
pub struct Engine<'a> {
    brn: &'a Brn,
    propensities: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub fn new(brn: &'a Brn) -> Self {
        Self {
            brn,
            propensities: vec![0.0; brn.reactions.len()],
        }
    }

    /// Samples the waiting time and the next reaction, or `None` when the
    /// configuration is absorbing.
    pub fn step(&mut self, config: &Configuration, rng: &mut RngStream) -> Result<Option<(f64, usize)>> {
        let total = self.brn.propensities(config, &mut self.propensities)?;
        if total <= 0.0 {
            return Ok(None);
        }
        let wait = rng.exponential(total);
        let index = select(&self.propensities, total, rng.uniform());
        Ok(Some((wait, index)))
    }

    pub fn simulate(
        &mut self,
        initial: &Configuration,
        stop: &StopCondition,
        rng: &mut RngStream,
        record: &RecordingPolicy,
    ) -> Result<Trajectory> {
        stop.check()?;
        let brn = self.brn;
        if initial.len() != brn.species_count() {
            return Err(Error::DimensionMismatch {
                expected: brn.species_count(),
                found: initial.len(),
            });
        }
        for s in &stop.extinct_any {
            if s.0 >= brn.species_count() {
                return Err(Error::UnknownSpecies(format!("index {}", s.0)));
            }
        }

        let snapshot_times: &[f64] = match record {
            RecordingPolicy::Snapshots(times) => times,
            _ => &[],
        };
        let mut next_snapshot = 0;
        let mut snapshots = Vec::with_capacity(snapshot_times.len());
        let mut events = Vec::new();

        let mut config = initial.clone();
        let mut time = 0.0;
        let mut steps = 0u64;
        let mut reaction_counts = vec![0u64; brn.reactions.len()];
        let mut extinction_times: Vec<Option<f64>> = config
            .counts()
            .iter()
            .map(|&c| (c == 0).then_some(0.0))
            .collect();

        let extinct = |config: &Configuration| stop.extinct_any.iter().find(|s| config.get(**s) == 0).copied();

        let termination = loop {
            if let Some(s) = extinct(&config) {
                break Termination::SpeciesExtinct(s.0);
            }
            if stop.max_steps.is_some_and(|n| steps >= n) {
                break Termination::MaxSteps;
            }
            let Some((wait, index)) = self.step(&config, rng)? else {
                let horizon = stop.max_time.unwrap_or(f64::INFINITY);
                while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= horizon {
                    snapshots.push(Snapshot {
                        time: snapshot_times[next_snapshot],
                        config: config.clone(),
                    });
                    next_snapshot += 1;
                }
                break Termination::Absorbed;
            };
            let next_time = time + wait;
            let horizon = stop.max_time.unwrap_or(f64::INFINITY);
            let limit = next_time.min(horizon);
            while next_snapshot < snapshot_times.len()
                && (snapshot_times[next_snapshot] < limit
                    || (next_time > horizon && snapshot_times[next_snapshot] <= horizon))
            {
                snapshots.push(Snapshot {
                    time: snapshot_times[next_snapshot],
                    config: config.clone(),
                });
                next_snapshot += 1;
            }
            if next_time > horizon {
                time = horizon;
                break Termination::MaxTime;
            }

            brn.apply_in_place(index, &mut config)?;
            time = next_time;
            steps += 1;
            reaction_counts[index] += 1;
            for (slot, &c) in extinction_times.iter_mut().zip(config.counts()) {
                if c == 0 && slot.is_none() {
                    *slot = Some(time);
                }
            }
            if matches!(record, RecordingPolicy::Full) {
                events.push(Event {
                    time,
                    reaction_index: index,
                    config_after: config.clone(),
                });
            }
        };

        Ok(Trajectory {
            initial: initial.clone(),
            events,
            snapshots,
            final_config: config,
            final_time: time,
            termination,
            rng_seed: rng.seed(),
            replicate: rng.replicate(),
            step_count: steps,
            reaction_counts,
            extinction_times,
        })
    }
}

/// Lowest index `i` with cumulative propensity through `i` exceeding `u * total`.
fn select(propensities: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &a) in propensities.iter().enumerate() {
        if a > 0.0 {
            acc += a;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

/// One step of the direct method from `config`.
pub fn step(brn: &Brn, config: &Configuration, rng: &mut RngStream) -> Result<Option<(f64, usize)>> {
    Engine::new(brn).step(config, rng)
}

pub fn simulate(
    brn: &Brn,
    initial: &Configuration,
    stop: &StopCondition,
    rng: &mut RngStream,
    record: &RecordingPolicy,
) -> Result<Trajectory> {
    Engine::new(brn).simulate(initial, stop, rng, record)
}

/// Successor distribution of the embedded discrete-time chain,
/// `P(x, y) = Q(x, y) / sum_z Q(x, z)`, with reactions reaching the same
/// configuration merged.
pub fn embedded_successors(brn: &Brn, config: &Configuration) -> Result<Vec<(Configuration, f64)>> {
    let mut props = vec![0.0; brn.reactions.len()];
    let total = brn.propensities(config, &mut props)?;
    if total <= 0.0 {
        return Err(Error::AbsorbingState);
    }
    let mut out: Vec<(Configuration, f64)> = Vec::new();
    for (i, &a) in props.iter().enumerate() {
        if a <= 0.0 {
            continue;
        }
        let next = brn.apply(i, config)?;
        let p = a / total;
        match out.iter_mut().find(|(c, _)| *c == next) {
            Some(entry) => entry.1 += p,
            None => out.push((next, p)),
        }
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{ProtocolBrn, ProtocolKind, ProtocolSpec};
use crate::rng::RngStream;
use crate::ssa::{Engine, RecordingPolicy, StopCondition, Trajectory};

use super::sweep::{gap_sweep, sweep_csv, SweepConfig};

/// One simulated day in minutes.
pub const DAY_MIN: f64 = 1440.0;
/// Initial counts of the single-run figures at full scale.
pub const RUN_A0: u64 = 151_000;
pub const RUN_B0: u64 = 149_000;
/// Total initial population of the sweep figures at full scale.
pub const SWEEP_N: u64 = 300_000;
pub const SWEEP_REPLICATES: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureDataset {
    pub figure: u32,
    pub scale: f64,
    pub seed: u64,
    pub files: Vec<DataFile>,
}

/// What a figure id stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FigurePlan {
    Run {
        protocol: ProtocolSpec,
        a0: u64,
        b0: u64,
        t_end: f64,
        dt: f64,
    },
    Sweep(SweepConfig),
}

fn step_fractions(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            (x * 1e6).round() / 1e6
        })
        .collect()
}

fn no_interaction() -> ProtocolSpec {
    ProtocolSpec {
        alpha: 0.0,
        ..ProtocolSpec::table1(ProtocolKind::Conjugation)
    }
}

/// Figure plans at a given scale:
/// 1 single conjugation run over a day, 2 the full s-curve at 60 and
/// 120 min, 3 its middle, 4 the s-curve without interaction at 60 min and
/// one day, 5 the single run without interaction.
pub fn figure_plan(figure: u32, scale: f64, seed: u64) -> Result<FigurePlan> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidParameter(format!("scale = {scale} must be in (0, 1]")));
    }
    let count = |n: u64| (n as f64 * scale).round() as u64;
    let sweep = |protocol: ProtocolSpec, fractions: Vec<f64>, times: Vec<f64>| {
        FigurePlan::Sweep(SweepConfig {
            protocol: protocol.scaled(scale),
            n: count(SWEEP_N),
            fractions,
            replicates: SWEEP_REPLICATES,
            times,
            seed,
        })
    };
    let run = |protocol: ProtocolSpec| FigurePlan::Run {
        protocol: protocol.scaled(scale),
        a0: count(RUN_A0),
        b0: count(RUN_B0),
        t_end: DAY_MIN,
        dt: 1.0,
    };
    let conj = ProtocolSpec::table1(ProtocolKind::Conjugation);
    Ok(match figure {
        1 => run(conj),
        2 => sweep(conj, step_fractions(0.0, 1.0, 21), vec![60.0, 120.0]),
        3 => sweep(conj, step_fractions(0.45, 0.55, 11), vec![60.0, 120.0]),
        4 => sweep(no_interaction(), step_fractions(0.0, 1.0, 21), vec![60.0, DAY_MIN]),
        5 => run(no_interaction()),
        other => return Err(Error::UnknownFigure(other)),
    })
}

/// `time,<species>` with one row per snapshot; the dummy species is left out.
pub fn trajectory_csv(protocol: &ProtocolBrn, trajectory: &Trajectory) -> String {
    let observed = protocol.observed_species();
    let mut out = String::from("time");
    for &id in &observed {
        out.push(',');
        out.push_str(protocol.brn.species_name(id));
    }
    out.push('\n');
    for s in &trajectory.snapshots {
        out.push_str(&s.time.to_string());
        for &id in &observed {
            out.push(',');
            out.push_str(&s.config.get(id).to_string());
        }
        out.push('\n');
    }
    out
}

/// Single run with snapshots every `dt` minutes up to `t_end`.
pub fn simulate_run(protocol: &ProtocolBrn, a0: u64, b0: u64, t_end: f64, dt: f64, seed: u64) -> Result<Trajectory> {
    let initial = protocol.initial(a0, b0);
    let mut rng = RngStream::new(seed, 0);
    Engine::new(&protocol.brn).simulate(
        &initial,
        &StopCondition::max_time(t_end),
        &mut rng,
        &RecordingPolicy::every(dt, t_end),
    )
}

pub fn reproduce_figure(figure: u32, scale: f64, seed: u64) -> Result<FigureDataset> {
    let plan = figure_plan(figure, scale, seed)?;
    let contents = match plan {
        FigurePlan::Run {
            protocol,
            a0,
            b0,
            t_end,
            dt,
        } => {
            let brn = protocol.build()?;
            let traj = simulate_run(&brn, a0, b0, t_end, dt, seed)?;
            trajectory_csv(&brn, &traj)
        }
        FigurePlan::Sweep(cfg) => sweep_csv(&gap_sweep(&cfg)?),
    };
    Ok(FigureDataset {
        figure,
        scale,
        seed,
        files: vec![DataFile {
            name: format!("figure{figure}.csv"),
            contents,
        }],
    })
}

//! Consensus-probability estimation, exact solutions for the naive chain,
//! sweeps and figure datasets.

mod estimate;
mod figures;
mod naive_exact;
mod sweep;

pub use estimate::{
    azuma_bound, consensus_gap, estimate_consensus_prob, wilson_interval, ConsensusExperiment, EstimateResult,
    OutcomeTally,
};
pub use figures::{
    figure_plan, reproduce_figure, simulate_run, trajectory_csv, DataFile, FigureDataset, FigurePlan, DAY_MIN, RUN_A0,
    RUN_B0, SWEEP_N, SWEEP_REPLICATES,
};
pub use naive_exact::{exact_naive_win_prob, solve_naive, NaiveChainSpec, NaiveSolution, RateFn, MAX_STATES, RESIDUAL_TOLERANCE};
pub use sweep::{fit_logistic_slope, gap_sweep, sweep_csv, sweep_slope, SweepConfig, SweepRow, SWEEP_HEADER};

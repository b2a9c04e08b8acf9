use std::path::PathBuf;
use std::process::ExitCode;

use brnsim_cli::{run, RunOptions, Subcommand};
use clap::{Args, Parser};

#[derive(Parser)]
#[command(name = "brnsim", version, about = "Stochastic simulation and analysis of competing populations")]
enum Cli {
    /// Simulate trajectories of a protocol or model file.
    Simulate(CommonArgs),
    /// Sweep the initial fraction of A and record fractions at snapshot times.
    Sweep(CommonArgs),
    /// M-chain tables, expected extinction steps and dominance report.
    Mchain(CommonArgs),
    /// Exact win probabilities of the birth-death competition chain.
    ExactNaive(CommonArgs),
    /// Check the dominance conditions on a grid; exits 5 on violations.
    CheckDominance(CommonArgs),
    /// Write the dataset for one of the figures.
    ReproduceFigure(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Scale populations and volume by this factor in (0, 1].
    #[arg(long)]
    scale: Option<f64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "BRNSIM_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let (subcommand, args) = match Cli::parse() {
        Cli::Simulate(a) => (Subcommand::Simulate, a),
        Cli::Sweep(a) => (Subcommand::Sweep, a),
        Cli::Mchain(a) => (Subcommand::MChain, a),
        Cli::ExactNaive(a) => (Subcommand::ExactNaive, a),
        Cli::CheckDominance(a) => (Subcommand::CheckDominance, a),
        Cli::ReproduceFigure(a) => (Subcommand::ReproduceFigure, a),
    };
    let opts = RunOptions {
        subcommand,
        config: args.config,
        scale: args.scale,
        out_dir: args.out_dir,
        threads: args.threads,
    };
    match run(&opts) {
        Ok(manifest) => {
            for f in &manifest.outputs {
                println!("wrote {}", f.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use brnsim_core::analysis::{
    reproduce_figure, solve_naive, sweep_csv, gap_sweep, wilson_interval, EstimateResult, NaiveChainSpec,
    OutcomeTally, SweepConfig,
};
use brnsim_core::chains::{
    check_dominance, expected_extinction_steps, paper_mchain, simulate_mchain, LowerBoundingChain, MChainSpec,
};
use brnsim_core::parallel::map_indexed;
use brnsim_core::protocols::{classify_outcome, Outcome, ProtocolBrn, ProtocolSpec};
use brnsim_core::{derive_seed, Brn, Configuration, Engine, RecordingPolicy, RngStream, SpeciesId, StopCondition, Trajectory};
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_config, ExperimentConfig, Network, RecordKind};
use crate::error::{CliError, FieldError};
use crate::manifest::{sha256_hex, Outputs, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Sweep,
    MChain,
    ExactNaive,
    CheckDominance,
    ReproduceFigure,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Sweep => "sweep",
            Subcommand::MChain => "mchain",
            Subcommand::ExactNaive => "exact-naive",
            Subcommand::CheckDominance => "check-dominance",
            Subcommand::ReproduceFigure => "reproduce-figure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub subcommand: Subcommand,
    pub config: PathBuf,
    pub scale: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// What a subcommand hands back besides its files.
struct Report {
    violations: usize,
}

pub const ESTIMATES_HEADER: &str = "protocol,n,gap,replicates,p_hat,ci_lo,ci_hi";
pub const EXACT_HEADER: &str = "A,B,p_exact";
pub const DOMINANCE_HEADER: &str = "a,b,condition,lhs,rhs";
pub const MCHAIN_TABLE_HEADER: &str = "m,p_prime,q_prime";
pub const MCHAIN_STEPS_HEADER: &str = "m0,expected_steps,tail_bound,mc_replicates,mc_mean,mc_se,mc_timeouts";

/// Runs one subcommand and writes its outputs and manifest. Returns
/// [`CliError::Violations`] after writing everything when a check fails.
pub fn run(opts: &RunOptions) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let bytes = std::fs::read(&opts.config).map_err(CliError::io(&opts.config))?;
    let mut cfg = parse_config(&opts.config)?;
    if let Some(scale) = opts.scale {
        apply_scale(&mut cfg, opts.subcommand, scale)?;
    }
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let threads = opts
        .threads
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Validation(vec![FieldError::new("threads", e.to_string())]))?;

    let mut outputs = Outputs::new(out_dir.clone());
    let report = pool.install(|| match opts.subcommand {
        Subcommand::Simulate => simulate(&cfg, &mut outputs),
        Subcommand::Sweep => sweep(&cfg, &mut outputs),
        Subcommand::MChain => mchain(&cfg, &mut outputs),
        Subcommand::ExactNaive => exact_naive(&cfg, &mut outputs),
        Subcommand::CheckDominance => dominance(&cfg, &mut outputs),
        Subcommand::ReproduceFigure => figure(&cfg, opts.scale, &mut outputs),
    })?;

    let manifest = RunManifest {
        tool: "brnsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: opts.subcommand.name().into(),
        config_path: opts.config.display().to_string(),
        config_hash: sha256_hex(&bytes),
        scale: opts.scale,
        threads,
        seed: cfg.seed,
        replicates: cfg.replicates,
        replicate_seeds: (0..cfg.replicates).map(|i| derive_seed(cfg.seed, i)).collect(),
        outputs: outputs.files,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    manifest.write(&out_dir)?;
    if report.violations > 0 {
        return Err(CliError::Violations(report.violations));
    }
    Ok(manifest)
}

fn apply_scale(cfg: &mut ExperimentConfig, sub: Subcommand, scale: f64) -> Result<(), CliError> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(CliError::Validation(vec![FieldError::new("--scale", "must be in (0, 1]")]));
    }
    if sub == Subcommand::ReproduceFigure {
        cfg.figure.scale = scale;
        return Ok(());
    }
    match &mut cfg.network {
        Network::Protocol(spec) => *spec = spec.scaled(scale),
        Network::Model { .. } => {
            return Err(CliError::Validation(vec![FieldError::new(
                "--scale",
                "only protocol configs can be rescaled",
            )]))
        }
    }
    for v in cfg.initial.values_mut() {
        *v = (*v as f64 * scale).round() as u64;
    }
    if let Some(s) = &mut cfg.sweep {
        s.n = (s.n as f64 * scale).round() as u64;
    }
    Ok(())
}

fn csv_with_header(header: &str, lines: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn json_text(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn protocol_of(cfg: &ExperimentConfig) -> Result<&ProtocolSpec, CliError> {
    match &cfg.network {
        Network::Protocol(spec) => Ok(spec),
        Network::Model { .. } => Err(CliError::Validation(vec![FieldError::new(
            "protocol",
            "this subcommand needs a [protocol] section",
        )])),
    }
}

/// The network to simulate plus, for protocol runs, the competing pair.
struct Prepared {
    brn: Brn,
    initial: Configuration,
    pair: Option<(ProtocolBrn, SpeciesId, SpeciesId)>,
    observed: Vec<SpeciesId>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    match &cfg.network {
        Network::Protocol(spec) => {
            let pb = spec.build().map_err(CliError::runtime("building protocol"))?;
            let a = cfg.initial.get("A").copied().unwrap_or(0);
            let b = cfg.initial.get("B").copied().unwrap_or(0);
            let initial = pb.initial(a, b);
            let (maj, min) = if b > a { (pb.b, pb.a) } else { (pb.a, pb.b) };
            Ok(Prepared {
                brn: pb.brn.clone(),
                initial,
                observed: pb.observed_species(),
                pair: Some((pb, maj, min)),
            })
        }
        Network::Model { brn, .. } => {
            let counts: Vec<(&str, u64)> = cfg.initial.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            let initial = brn.configuration(&counts).map_err(CliError::runtime("initial configuration"))?;
            let report = brn.validate(std::slice::from_ref(&initial));
            if !report.is_clean() {
                return Err(CliError::Validation(
                    report
                        .violations
                        .iter()
                        .map(|v| FieldError::new("model", v.to_string()))
                        .collect(),
                ));
            }
            Ok(Prepared {
                brn: brn.clone(),
                initial,
                observed: brn.species.iter().map(|s| s.id).filter(|id| Some(*id) != brn.dummy).collect(),
                pair: None,
            })
        }
    }
}

fn trajectory_csv(brn: &Brn, observed: &[SpeciesId], traj: &Trajectory, record: RecordKind) -> String {
    let header = std::iter::once("time".to_string())
        .chain(observed.iter().map(|&id| brn.species_name(id).to_string()))
        .collect::<Vec<_>>()
        .join(",");
    let row = |t: f64, c: &Configuration| {
        std::iter::once(t.to_string())
            .chain(observed.iter().map(|&id| c.get(id).to_string()))
            .collect::<Vec<_>>()
            .join(",")
    };
    let rows: Vec<String> = match record {
        RecordKind::Full => std::iter::once(row(0.0, &traj.initial))
            .chain(traj.events.iter().map(|e| row(e.time, &e.config_after)))
            .collect(),
        _ => traj.snapshots.iter().map(|s| row(s.time, &s.config)).collect(),
    };
    csv_with_header(&header, rows)
}

fn simulate(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let prep = prepare(cfg)?;
    let brn = &prep.brn;
    let extinct = cfg
        .stop
        .extinct
        .iter()
        .map(|n| brn.species_id(n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::runtime("stop condition"))?;
    let stop = StopCondition {
        max_time: cfg.stop.max_time,
        max_steps: cfg.stop.max_steps,
        extinct_any: extinct,
    };
    stop.check()
        .map_err(|e| CliError::Validation(vec![FieldError::new("stop", e.to_string())]))?;
    let policy = match cfg.record {
        RecordKind::Full => RecordingPolicy::Full,
        RecordKind::Snapshots => RecordingPolicy::every(cfg.record_dt, cfg.stop.max_time.expect("validated")),
        RecordKind::Summary => RecordingPolicy::SummaryOnly,
    };

    let results = map_indexed(cfg.replicates, |r| {
        let mut rng = RngStream::new(cfg.seed, r);
        Engine::new(brn).simulate(&prep.initial, &stop, &mut rng, &policy).map_err(|source| CliError::Runtime {
            context: format!("replicate {r} (seed {}, stream seed {})", cfg.seed, derive_seed(cfg.seed, r)),
            source,
        })
    });
    let mut trajectories = Vec::with_capacity(results.len());
    for r in results {
        trajectories.push(r?);
    }

    let mut summaries = Vec::new();
    let mut outcomes: Vec<Outcome> = Vec::new();
    for (r, traj) in trajectories.iter().enumerate() {
        if cfg.record != RecordKind::Summary {
            out.write(&format!("trajectory_{r:04}.csv"), &trajectory_csv(brn, &prep.observed, traj, cfg.record))?;
        }
        let outcome = match &prep.pair {
            Some((_, maj, min)) => Some(classify_outcome(traj, *maj, *min).map_err(CliError::runtime("classifying"))?),
            None => None,
        };
        if let Some(o) = outcome {
            outcomes.push(o);
        }
        let final_counts: BTreeMap<&str, u64> =
            prep.observed.iter().map(|&id| (brn.species_name(id), traj.final_config.get(id))).collect();
        let reaction_counts: BTreeMap<&str, u64> = brn
            .reactions
            .iter()
            .zip(&traj.reaction_counts)
            .map(|(rx, &c)| (rx.label.as_str(), c))
            .collect();
        summaries.push(json!({
            "replicate": r,
            "seed": traj.rng_seed,
            "stream_seed": derive_seed(traj.rng_seed, r as u64),
            "termination": traj.termination,
            "step_count": traj.step_count,
            "final_time": traj.final_time,
            "final": final_counts,
            "reaction_counts": reaction_counts,
            "outcome": outcome,
        }));
    }
    out.write("summary.json", &json_text(&json!({ "replicates": summaries })))?;

    if let Some((pb, _, _)) = &prep.pair {
        let est = EstimateResult::from_outcomes(outcomes);
        let a = prep.initial.get(pb.a);
        let b = prep.initial.get(pb.b);
        let protocol = protocol_of(cfg)?.kind.name();
        let line = format!(
            "{protocol},{},{},{},{},{},{}",
            a + b,
            a.abs_diff(b),
            est.replicates,
            est.p_hat,
            est.ci_lo,
            est.ci_hi
        );
        out.write("estimates.csv", &csv_with_header(ESTIMATES_HEADER, [line]))?;
        print_tally(&est.tally);
    }
    Ok(Report { violations: 0 })
}

fn print_tally(t: &OutcomeTally) {
    let (lo, hi) = wilson_interval(t.majority_wins, t.total());
    println!(
        "majority {} minority {} both-extinct {} timeout {} (majority 95% CI [{lo:.4}, {hi:.4}])",
        t.majority_wins, t.minority_wins, t.both_extinct, t.timeout
    );
}

fn sweep(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let spec = protocol_of(cfg)?;
    let Some(s) = &cfg.sweep else {
        return Err(CliError::Validation(vec![FieldError::new("sweep", "section required")]));
    };
    let sc = SweepConfig {
        protocol: *spec,
        n: s.n,
        fractions: s.fractions.clone(),
        replicates: s.replicates,
        times: s.times.clone(),
        seed: cfg.seed,
    };
    let rows = gap_sweep(&sc).map_err(CliError::runtime(format!("sweep (seed {})", cfg.seed)))?;
    out.write("sweep.csv", &sweep_csv(&rows))?;
    println!("{} rows", rows.len());
    Ok(Report { violations: 0 })
}

/// Rates `(gamma, rho_out, delta, pair rate)` from `[chain]`, falling back
/// to the protocol: summed growth bound, out-flow, death and `alpha / v`.
pub fn chain_rates(cfg: &ExperimentConfig) -> Result<(f64, f64, f64, f64), CliError> {
    let fallback = match &cfg.network {
        Network::Protocol(spec) => Some(spec),
        Network::Model { .. } => None,
    };
    let get = |name: &str, v: Option<f64>, derived: Option<f64>| {
        v.or(derived)
            .ok_or_else(|| FieldError::new(format!("chain.{name}"), "required when there is no [protocol]"))
    };
    let p = fallback.map(|s| s.params);
    let rates = [
        get("gamma", cfg.chain.gamma, p.map(|p| p.gamma_sum_bound())),
        get("rho_out", cfg.chain.rho_out, p.map(|p| p.rho_out)),
        get("delta", cfg.chain.delta, p.map(|p| p.delta)),
        get("alpha", cfg.chain.alpha, fallback.map(|s| s.alpha / s.params.volume_ml)),
    ];
    let mut vals = [0.0; 4];
    let mut errs = Vec::new();
    for (slot, r) in vals.iter_mut().zip(rates) {
        match r {
            Ok(v) => *slot = v,
            Err(e) => errs.push(e),
        }
    }
    if !errs.is_empty() {
        return Err(CliError::Validation(errs));
    }
    if !(vals[3] > 0.0) || !(vals[0] > 0.0) {
        return Err(CliError::Validation(vec![FieldError::new(
            "chain",
            "gamma and alpha must be > 0 for the chain analysis",
        )]));
    }
    Ok((vals[0], vals[1], vals[2], vals[3]))
}

fn condition_name(c: brnsim_core::chains::Condition) -> &'static str {
    use brnsim_core::chains::Condition::*;
    match c {
        BirthBelow => "birth_below",
        DeathAbove => "death_above",
        NoCrossing => "no_crossing",
    }
}

fn dominance_rows(cfg: &ExperimentConfig, spec: &MChainSpec, rates: (f64, f64, f64, f64)) -> Result<(String, usize), CliError> {
    let (g, r, d, a) = rates;
    let chain = LowerBoundingChain::with_rates(g, r, d, a).map_err(CliError::runtime("lower-bounding chain"))?;
    let report = check_dominance(&chain, spec, cfg.dominance.a_max, cfg.dominance.b_max);
    let lines = report
        .violations
        .iter()
        .map(|v| format!("{},{},{},{},{}", v.a, v.b, condition_name(v.condition), v.lhs, v.rhs));
    println!("checked {} states, {} violations", report.checked, report.violations.len());
    Ok((csv_with_header(DOMINANCE_HEADER, lines), report.violations.len()))
}

fn mchain(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let rates = chain_rates(cfg)?;
    let spec = paper_mchain(rates.0, rates.1, rates.2, rates.3).map_err(CliError::runtime("M-chain"))?;
    let table = (0..=cfg.mchain.table_max).map(|m| format!("{m},{},{}", spec.birth(m), spec.death(m)));
    out.write("mchain_table.csv", &csv_with_header(MCHAIN_TABLE_HEADER, table))?;

    let mut lines = Vec::new();
    for (i, &m0) in cfg.mchain.m0.iter().enumerate() {
        let exact = expected_extinction_steps(&spec, m0, cfg.mchain.tol)
            .map_err(CliError::runtime(format!("expected steps from m0 = {m0}")))?;
        let point_seed = derive_seed(cfg.seed, i as u64);
        let runs = map_indexed(cfg.mchain.mc_replicates, |r| {
            let mut rng = RngStream::new(point_seed, r);
            simulate_mchain(&spec, m0, &mut rng, cfg.mchain.max_steps).extinction_steps()
        });
        let done: Vec<f64> = runs.iter().filter_map(|s| s.map(|v| v as f64)).collect();
        let timeouts = runs.len() - done.len();
        let (mean, se) = mean_se(&done);
        lines.push(format!(
            "{m0},{},{},{},{},{},{timeouts}",
            exact.value, exact.tail_bound, cfg.mchain.mc_replicates, mean, se
        ));
    }
    out.write("mchain_steps.csv", &csv_with_header(MCHAIN_STEPS_HEADER, lines))?;
    let (csv, violations) = dominance_rows(cfg, &spec, rates)?;
    out.write("dominance.csv", &csv)?;
    Ok(Report { violations })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn dominance(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let rates = chain_rates(cfg)?;
    let spec = match cfg.dominance.constant {
        Some((p, q)) => MChainSpec::constant(p, q),
        None => paper_mchain(rates.0, rates.1, rates.2, rates.3),
    }
    .map_err(CliError::runtime("M-chain"))?;
    let (csv, violations) = dominance_rows(cfg, &spec, rates)?;
    out.write("dominance.csv", &csv)?;
    Ok(Report { violations })
}

fn exact_naive(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let e = &cfg.exact;
    let spec = if e.birth_b.is_some() || e.death_b.is_some() {
        let c = |v: f64| -> brnsim_core::analysis::RateFn { std::sync::Arc::new(move |_, _| v) };
        NaiveChainSpec::asymmetric(
            c(e.birth),
            c(e.death),
            c(e.birth_b.unwrap_or(e.birth)),
            c(e.death_b.unwrap_or(e.death)),
            e.cap,
        )
    } else {
        NaiveChainSpec::constant(e.birth, e.death, e.cap)
    };
    let sol = solve_naive(&spec, e.max_total).map_err(CliError::runtime("exact solve"))?;
    let lines = sol.rows().map(|(a, b, p)| format!("{a},{b},{p}"));
    out.write("exact.csv", &csv_with_header(EXACT_HEADER, lines))?;
    out.write(
        "exact_summary.json",
        &json_text(&json!({ "max_total": sol.max_total, "cap": e.cap, "residual": sol.residual })),
    )?;
    println!("max residual {:e}", sol.residual);
    Ok(Report { violations: 0 })
}

fn figure(cfg: &ExperimentConfig, scale: Option<f64>, out: &mut Outputs) -> Result<Report, CliError> {
    let Some(id) = cfg.figure.id else {
        return Err(CliError::Validation(vec![FieldError::new("figure.id", "required")]));
    };
    let scale = scale.unwrap_or(cfg.figure.scale);
    let ds = reproduce_figure(id, scale, cfg.seed).map_err(CliError::runtime(format!("figure {id} (seed {})", cfg.seed)))?;
    for f in &ds.files {
        out.write(&f.name, &f.contents)?;
    }
    Ok(Report { violations: 0 })
}

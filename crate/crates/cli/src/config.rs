//! Experiment config files. See `configs/` for complete examples.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use brnsim_core::protocols::{GrowthSpec, ProtocolKind, ProtocolSpec, TwoResourceParams};
use brnsim_core::Brn;
use serde::Deserialize;

use crate::error::{CliError, FieldError, ParseError};
use crate::model::parse_model;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    replicates: Option<u64>,
    threads: Option<usize>,
    model: Option<PathBuf>,
    protocol: Option<RawProtocol>,
    initial: Option<BTreeMap<String, u64>>,
    stop: Option<RawStop>,
    record: Option<RawRecord>,
    output: Option<RawOutput>,
    sweep: Option<RawSweep>,
    chain: Option<RawChain>,
    mchain: Option<RawMChain>,
    dominance: Option<RawDominance>,
    exact: Option<RawExact>,
    figure: Option<RawFigure>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    kind: Option<String>,
    delta: Option<f64>,
    alpha: Option<f64>,
    alpha_prime: Option<f64>,
    gamma1_max: Option<f64>,
    gamma2_max: Option<f64>,
    #[serde(rename = "R1_0")]
    r1_0: Option<f64>,
    #[serde(rename = "R2_0")]
    r2_0: Option<f64>,
    rho1_in: Option<f64>,
    rho2_in: Option<f64>,
    rho_out: Option<f64>,
    volume_ml: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStop {
    max_time: Option<f64>,
    max_steps: Option<u64>,
    #[serde(default)]
    extinct: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    policy: Option<String>,
    dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    n: Option<u64>,
    fractions: Option<Vec<f64>>,
    fraction_min: Option<f64>,
    fraction_max: Option<f64>,
    fraction_count: Option<usize>,
    times: Option<Vec<f64>>,
    replicates: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    gamma: Option<f64>,
    rho_out: Option<f64>,
    delta: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMChain {
    m0: Option<Vec<u64>>,
    tol: Option<f64>,
    table_max: Option<u64>,
    mc_replicates: Option<u64>,
    max_steps: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDominance {
    a_max: Option<u64>,
    b_max: Option<u64>,
    birth: Option<f64>,
    death: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExact {
    max_total: Option<u64>,
    cap: Option<u64>,
    birth: Option<f64>,
    death: Option<f64>,
    birth_b: Option<f64>,
    death_b: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFigure {
    id: Option<u32>,
    scale: Option<f64>,
}

/// The network an experiment runs on.
#[derive(Debug, Clone)]
pub enum Network {
    Protocol(ProtocolSpec),
    Model { path: PathBuf, brn: Brn },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordKind {
    Full,
    Snapshots,
    Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopSpec {
    pub max_time: Option<f64>,
    pub max_steps: Option<u64>,
    pub extinct: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n: u64,
    pub fractions: Vec<f64>,
    pub times: Vec<f64>,
    pub replicates: u64,
}

/// Rates of the lower-bounding chain; `None` means "derive from the protocol".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainRates {
    pub gamma: Option<f64>,
    pub rho_out: Option<f64>,
    pub delta: Option<f64>,
    /// Per-pair kill rate.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MChainSection {
    pub m0: Vec<u64>,
    pub tol: f64,
    pub table_max: u64,
    pub mc_replicates: u64,
    pub max_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceSection {
    pub a_max: u64,
    pub b_max: u64,
    /// Constant `(p', q')` to check instead of the derived M-chain.
    pub constant: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSection {
    pub max_total: u64,
    pub cap: Option<u64>,
    pub birth: f64,
    pub death: f64,
    pub birth_b: Option<f64>,
    pub death_b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureSection {
    pub id: Option<u32>,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: u64,
    pub threads: Option<usize>,
    pub network: Network,
    pub initial: BTreeMap<String, u64>,
    pub stop: StopSpec,
    pub record: RecordKind,
    pub record_dt: f64,
    pub out_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
    pub chain: ChainRates,
    pub mchain: MChainSection,
    pub dominance: DominanceSection,
    pub exact: ExactSection,
    pub figure: FigureSection,
}

fn check_nonneg(errors: &mut Vec<FieldError>, field: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x >= 0.0) || !x.is_finite() {
            errors.push(FieldError::new(field, format!("must be finite and >= 0, got {x}")));
        }
    }
}

fn check_pos(errors: &mut Vec<FieldError>, field: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x > 0.0) || !x.is_finite() {
            errors.push(FieldError::new(field, format!("must be finite and > 0, got {x}")));
        }
    }
}

fn protocol_spec(raw: &RawProtocol, errors: &mut Vec<FieldError>) -> Option<ProtocolSpec> {
    let kind = match raw.kind.as_deref() {
        None => {
            errors.push(FieldError::new("protocol.kind", "required"));
            return None;
        }
        Some("naive") => ProtocolKind::Naive,
        Some("mutual_annihilation") => ProtocolKind::MutualAnnihilation,
        Some("conjugation") => ProtocolKind::Conjugation,
        Some(other) => {
            errors.push(FieldError::new(
                "protocol.kind",
                format!("`{other}` is not one of naive, mutual_annihilation, conjugation"),
            ));
            return None;
        }
    };
    let before = errors.len();
    for (name, v) in [
        ("protocol.delta", raw.delta),
        ("protocol.alpha", raw.alpha),
        ("protocol.gamma1_max", raw.gamma1_max),
        ("protocol.gamma2_max", raw.gamma2_max),
        ("protocol.R1_0", raw.r1_0),
        ("protocol.R2_0", raw.r2_0),
        ("protocol.rho1_in", raw.rho1_in),
        ("protocol.rho2_in", raw.rho2_in),
        ("protocol.rho_out", raw.rho_out),
    ] {
        check_nonneg(errors, name, v);
    }
    check_pos(errors, "protocol.volume_ml", raw.volume_ml);
    check_pos(errors, "protocol.alpha_prime", raw.alpha_prime);
    if errors.len() > before {
        return None;
    }

    let base = ProtocolSpec::table1(kind);
    let p = base.params;
    let growth = |g: GrowthSpec, max: Option<f64>, initial: Option<f64>| GrowthSpec {
        max_rate: max.unwrap_or(g.max_rate),
        initial: initial.unwrap_or(g.initial),
        bound: None,
    };
    let params = TwoResourceParams {
        rho1_in: raw.rho1_in.unwrap_or(p.rho1_in),
        rho2_in: raw.rho2_in.unwrap_or(p.rho2_in),
        rho_out: raw.rho_out.unwrap_or(p.rho_out),
        delta: raw.delta.unwrap_or(p.delta),
        gamma1: growth(p.gamma1, raw.gamma1_max, raw.r1_0),
        gamma2: growth(p.gamma2, raw.gamma2_max, raw.r2_0),
        volume_ml: raw.volume_ml.unwrap_or(p.volume_ml),
    };
    if let Err(e) = params.check() {
        errors.push(FieldError::new("protocol", e.to_string()));
        return None;
    }
    Some(ProtocolSpec {
        kind,
        params,
        alpha: raw.alpha.unwrap_or(base.alpha),
        alpha_prime: raw.alpha_prime.unwrap_or(base.alpha_prime),
    })
}

fn sweep_spec(raw: &RawSweep, default_replicates: u64, errors: &mut Vec<FieldError>) -> Option<SweepSpec> {
    let before = errors.len();
    let n = raw.n.unwrap_or_else(|| {
        errors.push(FieldError::new("sweep.n", "required"));
        0
    });
    let fractions = match (&raw.fractions, raw.fraction_min, raw.fraction_max, raw.fraction_count) {
        (Some(f), None, None, None) => f.clone(),
        (None, Some(lo), Some(hi), Some(k)) if k >= 2 => (0..k)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (k - 1) as f64;
                (x * 1e9).round() / 1e9
            })
            .collect(),
        (None, Some(lo), Some(_), Some(1)) => vec![lo],
        _ => {
            errors.push(FieldError::new(
                "sweep.fractions",
                "give either `fractions` or all of `fraction_min`, `fraction_max`, `fraction_count`",
            ));
            Vec::new()
        }
    };
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        errors.push(FieldError::new("sweep.fractions", format!("{f} is outside [0, 1]")));
    }
    let times = raw.times.clone().unwrap_or_else(|| {
        errors.push(FieldError::new("sweep.times", "required"));
        Vec::new()
    });
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        errors.push(FieldError::new("sweep.times", "must be finite, >= 0 and ascending"));
    }
    let replicates = raw.replicates.unwrap_or(default_replicates);
    if replicates == 0 {
        errors.push(FieldError::new("sweep.replicates", "must be >= 1"));
    }
    (errors.len() == before).then_some(SweepSpec {
        n,
        fractions,
        times,
        replicates,
    })
}

/// Parses and validates a config file. Relative model paths resolve against
/// the config's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_config_str(path, &text)
}

pub fn parse_config_str(path: &Path, text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        error: ParseError::from_toml(text, &e),
    })?;
    let mut errors = Vec::new();

    let seed = raw.seed.unwrap_or_else(|| {
        errors.push(FieldError::new("seed", "required; runs are never seeded from the clock"));
        0
    });
    let replicates = raw.replicates.unwrap_or(1);
    if replicates == 0 {
        errors.push(FieldError::new("replicates", "must be >= 1"));
    }
    if raw.threads == Some(0) {
        errors.push(FieldError::new("threads", "must be >= 1"));
    }

    let network = match (&raw.protocol, &raw.model) {
        (Some(_), Some(_)) => {
            errors.push(FieldError::new("model", "give either [protocol] or model, not both"));
            None
        }
        (Some(p), None) => protocol_spec(p, &mut errors).map(Network::Protocol),
        (None, Some(m)) => {
            let full = path.parent().unwrap_or(Path::new(".")).join(m);
            match std::fs::read_to_string(&full) {
                Ok(text) => match parse_model(&full, &text) {
                    Ok(brn) => Some(Network::Model { path: full, brn }),
                    Err(CliError::Validation(errs)) => {
                        errors.extend(errs.into_iter().map(|e| FieldError::new(format!("model.{}", e.field), e.reason)));
                        None
                    }
                    Err(e) => return Err(e),
                },
                Err(e) => {
                    errors.push(FieldError::new("model", format!("{}: {e}", full.display())));
                    None
                }
            }
        }
        (None, None) => {
            // Chain-only subcommands can run without a network.
            protocol_spec(
                &RawProtocol {
                    kind: Some("conjugation".into()),
                    ..Default::default()
                },
                &mut errors,
            )
            .map(Network::Protocol)
        }
    };

    let initial = raw.initial.clone().unwrap_or_default();
    if let Some(Network::Model { brn, .. }) = &network {
        for name in initial.keys() {
            if brn.species_id(name).is_err() {
                errors.push(FieldError::new(format!("initial.{name}"), "not a species of the model"));
            }
        }
    }
    if let Some(Network::Protocol(_)) = &network {
        for name in initial.keys() {
            if name != "A" && name != "B" {
                errors.push(FieldError::new(format!("initial.{name}"), "protocol runs take only A and B"));
            }
        }
    }

    let raw_stop = raw.stop.unwrap_or_default();
    check_pos(&mut errors, "stop.max_time", raw_stop.max_time);
    let stop = StopSpec {
        max_time: raw_stop.max_time,
        max_steps: raw_stop.max_steps,
        extinct: raw_stop.extinct,
    };
    if let Some(net) = &network {
        for name in &stop.extinct {
            let known = match net {
                Network::Protocol(_) => name == "A" || name == "B",
                Network::Model { brn, .. } => brn.species_id(name).is_ok(),
            };
            if !known {
                errors.push(FieldError::new("stop.extinct", format!("unknown species `{name}`")));
            }
        }
    }

    let raw_record = raw.record.unwrap_or_default();
    let record = match raw_record
        .policy
        .as_deref()
        .unwrap_or(if stop.max_time.is_some() { "snapshots" } else { "summary" }) {
        "full" => RecordKind::Full,
        "snapshots" => RecordKind::Snapshots,
        "summary" => RecordKind::Summary,
        other => {
            errors.push(FieldError::new(
                "record.policy",
                format!("`{other}` is not one of full, snapshots, summary"),
            ));
            RecordKind::Summary
        }
    };
    let record_dt = raw_record.dt.unwrap_or(1.0);
    check_pos(&mut errors, "record.dt", Some(record_dt));
    if record == RecordKind::Snapshots && stop.max_time.is_none() {
        errors.push(FieldError::new("stop.max_time", "snapshot recording needs a time bound"));
    }

    let sweep = raw.sweep.as_ref().and_then(|s| sweep_spec(s, replicates, &mut errors));

    let rc = raw.chain.unwrap_or_default();
    for (name, v) in [("chain.rho_out", rc.rho_out), ("chain.delta", rc.delta)] {
        check_nonneg(&mut errors, name, v);
    }
    check_pos(&mut errors, "chain.gamma", rc.gamma);
    check_pos(&mut errors, "chain.alpha", rc.alpha);
    let chain = ChainRates {
        gamma: rc.gamma,
        rho_out: rc.rho_out,
        delta: rc.delta,
        alpha: rc.alpha,
    };

    let rm = raw.mchain.unwrap_or_default();
    let mchain = MChainSection {
        m0: rm.m0.unwrap_or_else(|| vec![100, 1000]),
        tol: rm.tol.unwrap_or(1e-10),
        table_max: rm.table_max.unwrap_or(50),
        mc_replicates: rm.mc_replicates.unwrap_or(0),
        max_steps: rm.max_steps.unwrap_or(100_000_000),
    };
    check_pos(&mut errors, "mchain.tol", Some(mchain.tol));
    if mchain.m0.is_empty() {
        errors.push(FieldError::new("mchain.m0", "must not be empty"));
    }

    let rd = raw.dominance.unwrap_or_default();
    let dominance = DominanceSection {
        a_max: rd.a_max.unwrap_or(200),
        b_max: rd.b_max.unwrap_or(200),
        constant: match (rd.birth, rd.death) {
            (Some(p), Some(q)) => {
                if !(0.0..=1.0).contains(&p) || !(q > 0.0 && q <= 1.0) || p + q > 1.0 {
                    errors.push(FieldError::new(
                        "dominance",
                        "need 0 <= birth, 0 < death and birth + death <= 1",
                    ));
                }
                Some((p, q))
            }
            (None, None) => None,
            _ => {
                errors.push(FieldError::new("dominance", "birth and death must be given together"));
                None
            }
        },
    };

    let re = raw.exact.unwrap_or_default();
    let max_total = re.max_total.or(re.cap).unwrap_or(12);
    let birth = re.birth.unwrap_or(1.0);
    let has_birth = birth > 0.0 || re.birth_b.unwrap_or(0.0) > 0.0;
    // With births the state space is cut at `max_total` unless a cap is given.
    let exact = ExactSection {
        max_total,
        cap: re.cap.or(has_birth.then_some(max_total)),
        birth,
        death: re.death.unwrap_or(1.0),
        birth_b: re.birth_b,
        death_b: re.death_b,
    };
    for (name, v) in [
        ("exact.birth", Some(exact.birth)),
        ("exact.death", Some(exact.death)),
        ("exact.birth_b", exact.birth_b),
        ("exact.death_b", exact.death_b),
    ] {
        check_nonneg(&mut errors, name, v);
    }
    if exact.max_total == 0 {
        errors.push(FieldError::new("exact.max_total", "must be >= 1"));
    }

    let rf = raw.figure.unwrap_or_default();
    let figure = FigureSection {
        id: rf.id,
        scale: rf.scale.unwrap_or(0.1),
    };
    if !(figure.scale > 0.0 && figure.scale <= 1.0) {
        errors.push(FieldError::new("figure.scale", "must be in (0, 1]"));
    }

    match network {
        Some(network) if errors.is_empty() => Ok(ExperimentConfig {
            seed,
            replicates,
            threads: raw.threads,
            network,
            initial,
            stop,
            record,
            record_dt,
            out_dir: raw
                .output
                .and_then(|o| o.dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            sweep,
            chain,
            mchain,
            dominance,
            exact,
            figure,
        }),
        _ => Err(CliError::Validation(errors)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        parse_config_str(Path::new("test.toml"), text)
    }

    fn field_errors(text: &str) -> Vec<FieldError> {
        match parse(text) {
            Err(CliError::Validation(e)) => e,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_seed_names_field() {
        let errs = field_errors("[protocol]\nkind = \"naive\"\n");
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].field, "seed");
    }

    #[test]
    fn negative_delta_rejected() {
        let errs = field_errors("seed = 1\n[protocol]\nkind = \"naive\"\ndelta = -0.1\n");
        assert_eq!(errs[0].field, "protocol.delta");
    }

    #[test]
    fn unknown_key_is_parse_error_with_line() {
        match parse("seed = 1\n[protocol]\nkind = \"naive\"\ndeltaa = 0.1\n") {
            Err(CliError::Parse { error, .. }) => {
                assert_eq!(error.line, 4);
                assert_eq!(error.field, "deltaa");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn type_error_is_parse_error() {
        match parse("seed = \"x\"\n") {
            Err(CliError::Parse { error, .. }) => assert_eq!(error.line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn protocol_defaults_fill_in() {
        let cfg = parse("seed = 3\n[protocol]\nkind = \"mutual_annihilation\"\nalpha = 1e-9\n").unwrap();
        match cfg.network {
            Network::Protocol(p) => {
                assert_eq!(p.kind, ProtocolKind::MutualAnnihilation);
                assert_eq!(p.alpha, 1e-9);
                assert_eq!(p.params, TwoResourceParams::table1());
            }
            _ => panic!("protocol expected"),
        }
    }

    #[test]
    fn sweep_range_expands() {
        let cfg = parse(
            "seed = 1\n[protocol]\nkind = \"naive\"\n[sweep]\nn = 100\nfraction_min = 0.4\nfraction_max = 0.6\nfraction_count = 11\ntimes = [60.0]\n",
        )
        .unwrap();
        let s = cfg.sweep.unwrap();
        assert_eq!(s.fractions.len(), 11);
        assert_eq!(s.fractions[1], 0.42);
        assert_eq!(s.replicates, 1);
    }

    #[test]
    fn initial_species_checked() {
        let errs = field_errors("seed = 1\n[protocol]\nkind = \"naive\"\n[initial]\nC = 3\n");
        assert_eq!(errs[0].field, "initial.C");
    }
}

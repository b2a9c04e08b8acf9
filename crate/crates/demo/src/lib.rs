//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string.
//! The same functions are available natively without the `js_` prefix.

use brnsim_core::analysis::{gap_sweep, simulate_run, sweep_slope, SweepConfig};
use brnsim_core::chains::{check_dominance, expected_extinction_steps, paper_mchain, LowerBoundingChain};
use brnsim_core::protocols::{ProtocolKind, ProtocolSpec};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Population of the reference culture the Table 1 volume belongs to.
const REFERENCE_N: f64 = 300_000.0;
const MAX_N: u64 = 300_000;

pub type DemoResult = Result<String, String>;

fn kind(name: &str) -> Result<ProtocolKind, String> {
    serde_json::from_value(json!(name)).map_err(|_| format!("unknown protocol `{name}`"))
}

/// The closed Table 1 culture sized for `n` cells.
fn protocol(name: &str, n: u64) -> Result<ProtocolSpec, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n = {n} must be in 1..={MAX_N}"));
    }
    Ok(ProtocolSpec::table1(kind(name)?).scaled(n as f64 / REFERENCE_N))
}

fn to_json(v: &impl Serialize) -> DemoResult {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// One trajectory from `n` cells with a share `fraction_a` of `A`, sampled
/// every `dt` minutes. Returns `{"columns": [...], "rows": [[...], ...]}`.
pub fn trajectory(kind: &str, n: u64, fraction_a: f64, seed: u64, t_end: f64, dt: f64) -> DemoResult {
    if !(0.0..=1.0).contains(&fraction_a) {
        return Err(format!("fraction {fraction_a} must be in [0, 1]"));
    }
    if !(t_end > 0.0 && dt > 0.0) || t_end / dt > 100_000.0 {
        return Err("need t_end > 0, dt > 0 and at most 1e5 snapshots".into());
    }
    let pb = protocol(kind, n)?.build().map_err(|e| e.to_string())?;
    let a = (fraction_a * n as f64).round() as u64;
    let traj = simulate_run(&pb, a, n - a, t_end, dt, seed).map_err(|e| e.to_string())?;
    let observed = pb.observed_species();
    let columns: Vec<&str> = std::iter::once("time")
        .chain(observed.iter().map(|&id| pb.brn.species_name(id)))
        .collect();
    let rows: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| std::iter::once(s.time).chain(observed.iter().map(|&id| s.config.get(id) as f64)).collect())
        .collect();
    to_json(&json!({ "columns": columns, "rows": rows, "steps": traj.step_count }))
}

/// Mean, min and max fraction of `A` at `time_min` for `points` initial
/// fractions spread evenly over `[lo, hi]`, plus the fitted logistic slope.
#[allow(clippy::too_many_arguments)]
pub fn s_curve(
    kind: &str,
    n: u64,
    lo: f64,
    hi: f64,
    points: u32,
    replicates: u64,
    time_min: f64,
    seed: u64,
) -> DemoResult {
    if !(2..=101).contains(&points) || !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err("need 2..=101 points and 0 <= lo < hi <= 1".into());
    }
    let step = (hi - lo) / (points - 1) as f64;
    let config = SweepConfig {
        protocol: protocol(kind, n)?,
        n,
        fractions: (0..points).map(|i| lo + step * i as f64).collect(),
        replicates,
        times: vec![time_min],
        seed,
    };
    let rows = gap_sweep(&config).map_err(|e| e.to_string())?;
    to_json(&json!({ "rows": rows, "slope": sweep_slope(&rows, time_min) }))
}

/// M-chain probabilities up to `m_max`, expected extinction steps from
/// `m0` and the dominance check on `[0, grid]^2`.
pub fn mchain(gamma: f64, rho_out: f64, delta: f64, alpha: f64, m_max: u64, m0: u64, grid: u64) -> DemoResult {
    if m_max > 10_000 || grid > 500 {
        return Err("m_max must be <= 10000 and grid <= 500".into());
    }
    let spec = paper_mchain(gamma, rho_out, delta, alpha).map_err(|e| e.to_string())?;
    let chain = LowerBoundingChain::with_rates(gamma, rho_out, delta, alpha).map_err(|e| e.to_string())?;
    let table: Vec<_> = (0..=m_max).map(|m| json!({ "m": m, "p": spec.birth(m), "q": spec.death(m) })).collect();
    let steps = expected_extinction_steps(&spec, m0, 1e-10).map_err(|e| e.to_string())?;
    let report = check_dominance(&chain, &spec, grid, grid);
    to_json(&json!({
        "table": table,
        "expected_steps": steps.value,
        "tail_bound": steps.tail_bound,
        "dominance": { "checked": report.checked, "violations": report.violations.len() },
    }))
}

fn js(r: DemoResult) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn js_trajectory(kind: &str, n: u32, fraction_a: f64, seed: u32, t_end: f64, dt: f64) -> Result<String, JsValue> {
    js(trajectory(kind, n.into(), fraction_a, seed.into(), t_end, dt))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn js_s_curve(
    kind: &str,
    n: u32,
    lo: f64,
    hi: f64,
    points: u32,
    replicates: u32,
    time_min: f64,
    seed: u32,
) -> Result<String, JsValue> {
    js(s_curve(kind, n.into(), lo, hi, points, replicates.into(), time_min, seed.into()))
}

#[wasm_bindgen]
pub fn js_mchain(gamma: f64, rho_out: f64, delta: f64, alpha: f64, m_max: u32, m0: u32, grid: u32) -> Result<String, JsValue> {
    js(mchain(gamma, rho_out, delta, alpha, m_max.into(), m0.into(), grid.into()))
}

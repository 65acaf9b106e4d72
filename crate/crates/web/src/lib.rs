//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every exported function takes plain numbers and returns a JSON string, so
//! the page needs no bindings beyond the generated glue. The `*_json`
//! functions hold the logic and run natively in tests.

use serde::Serialize;
use vsbbm_core::engine::{simulate, PruneRule, Pruning, SimSpec};
use vsbbm_core::fkpp::{solve_max_law, FkppSolver, GridSpec, InitialCondition};
use vsbbm_core::model::ProfileKind;
use vsbbm_core::{BranchingLaw, SpeedProfile};
use wasm_bindgen::prelude::*;

/// Longest horizon the page may request; keeps a solve under a second.
pub const MAX_HORIZON: f64 = 60.0;
/// Longest horizon for a simulated population.
pub const MAX_SAMPLE_HORIZON: f64 = 10.0;

#[derive(Debug, Serialize)]
struct Trace {
    profile: String,
    times: Vec<f64>,
    fronts: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Law {
    profile: String,
    x: Vec<f64>,
    cdf: Vec<f64>,
    median: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Histogram {
    profile: String,
    population: usize,
    max: Option<f64>,
    /// Bin lower edges, measured below the maximum.
    edges: Vec<f64>,
    counts: Vec<u64>,
}

fn profile(kind: &str, alpha: f64, horizon: f64, limit: f64) -> Result<SpeedProfile, String> {
    if !(horizon > 0.0 && horizon <= limit) {
        return Err(format!("horizon must be in (0, {limit}]"));
    }
    let kind: ProfileKind = serde_json::from_value(serde_json::Value::String(kind.to_owned()))
        .map_err(|_| format!("unknown profile `{kind}`; use homogeneous, plus or minus"))?;
    SpeedProfile::new(kind.shape(alpha), horizon).map_err(|e| e.to_string())
}

fn grid(dx: f64) -> Result<GridSpec, String> {
    if !(0.02..=0.5).contains(&dx) {
        return Err("dx must be in [0.02, 0.5]".into());
    }
    Ok(GridSpec::default().with_dx(dx))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Front `X(s)` at unit spacing up to the horizon.
pub fn front_trace_json(kind: &str, alpha: f64, horizon: f64, dx: f64) -> Result<String, String> {
    let p = profile(kind, alpha, horizon, MAX_HORIZON)?;
    let times: Vec<f64> = (1..=horizon.floor() as usize).map(|k| k as f64).collect();
    let mut solver = FkppSolver::new(p, BranchingLaw::binary(), &InitialCondition::Heaviside, grid(dx)?)
        .map_err(|e| e.to_string())?;
    let trace = solver.run(horizon, &times).map_err(|e| e.to_string())?;
    to_json(&Trace {
        profile: p.label(),
        times: trace.times,
        fronts: trace.positions,
    })
}

/// `P(max <= x)` at the horizon on `points` values of `x` around the front.
pub fn max_law_json(kind: &str, alpha: f64, horizon: f64, dx: f64, points: usize) -> Result<String, String> {
    let p = profile(kind, alpha, horizon, MAX_HORIZON)?;
    let (field, trace) = solve_max_law(p, &BranchingLaw::binary(), &InitialCondition::Heaviside, grid(dx)?, &[horizon])
        .map_err(|e| e.to_string())?;
    let median = trace.positions.first().copied();
    let centre = median.unwrap_or(0.0);
    let n = points.clamp(2, 2000);
    let x: Vec<f64> = (0..n)
        .map(|i| centre - 8.0 + 14.0 * i as f64 / (n - 1) as f64)
        .collect();
    let cdf = x.iter().map(|&v| field.max_cdf(v)).collect();
    to_json(&Law {
        profile: p.label(),
        x,
        cdf,
        median,
    })
}

/// One simulated replicate: histogram of distances below the maximum.
pub fn population_json(kind: &str, alpha: f64, horizon: f64, seed: u64, bins: usize) -> Result<String, String> {
    let p = profile(kind, alpha, horizon, MAX_SAMPLE_HORIZON)?;
    let spec = SimSpec::new(p, BranchingLaw::binary()).with_pruning(Pruning::BelowMax(PruneRule::for_horizon(horizon)));
    let (pop, _) = simulate(&spec, seed, |_| ()).map_err(|e| e.to_string())?;
    let max = pop.max();
    let bins = bins.clamp(1, 500);
    let mut counts = vec![0u64; bins];
    let depth = PruneRule::for_horizon(horizon).depth;
    let width = depth / bins as f64;
    if let Some(m) = max {
        for &x in pop.positions() {
            let i = ((m - x) / width) as usize;
            if i < bins {
                counts[i] += 1;
            }
        }
    }
    to_json(&Histogram {
        profile: p.label(),
        population: pop.len(),
        max,
        edges: (0..bins).map(|i| i as f64 * width).collect(),
        counts,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = frontTrace)]
pub fn front_trace(kind: &str, alpha: f64, horizon: f64, dx: f64) -> Result<String, JsError> {
    js(front_trace_json(kind, alpha, horizon, dx))
}

#[wasm_bindgen(js_name = maxLaw)]
pub fn max_law(kind: &str, alpha: f64, horizon: f64, dx: f64, points: usize) -> Result<String, JsError> {
    js(max_law_json(kind, alpha, horizon, dx, points))
}

#[wasm_bindgen(js_name = samplePopulation)]
pub fn sample_population(kind: &str, alpha: f64, horizon: f64, seed: u64, bins: usize) -> Result<String, JsError> {
    js(population_json(kind, alpha, horizon, seed, bins))
}

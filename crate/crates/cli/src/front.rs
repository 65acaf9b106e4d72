use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use vsbbm_core::config::ExperimentConfig;
use vsbbm_core::fkpp::{FkppSolver, InitialCondition};
use vsbbm_core::model::ProfileKind;
use vsbbm_core::numerics::least_squares;
use vsbbm_core::stats::{log_coefficient_trend, LogFit, MIN_HORIZONS};
use vsbbm_core::{Shape, SpeedProfile};

use crate::args::FrontArgs;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_csv, write_json};

#[derive(Debug, Serialize)]
struct Row {
    time: f64,
    front: f64,
    level: f64,
    dx: f64,
    dt: f64,
    profile: ProfileKind,
    alpha: f64,
    horizon: f64,
}

/// Free fit `X(s) = a + b s + c ln s` to one homogeneous trace.
#[derive(Debug, Serialize)]
struct FrontFit {
    from: f64,
    to: f64,
    slope: f64,
    log_coefficient: f64,
    intercept: f64,
}

#[derive(Debug, Serialize)]
struct HorizonFront {
    horizon: f64,
    front: f64,
}

#[derive(Debug, Serialize)]
struct ProfileSummary {
    profile: String,
    csv: String,
    config: String,
    fronts: Vec<HorizonFront>,
    predicted_log_coefficient: f64,
    front_fit: Option<FrontFit>,
    log_coefficient_trend: Option<Vec<LogFit>>,
}

pub fn run(args: &FrontArgs) -> Result<()> {
    let out = &args.common.out;
    ensure_dir(out)?;
    let configs: Vec<ExperimentConfig> = args
        .configs
        .iter()
        .map(ExperimentConfig::load)
        .collect::<vsbbm_core::Result<_>>()?;
    let names: Vec<String> = configs.iter().map(csv_name).collect();
    if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
        return Err(CliError::Usage(format!("configs share a profile: {names:?}")));
    }
    let mut summaries = Vec::new();
    for (cfg, name) in configs.iter().zip(&names) {
        let profile = cfg.speed_profile()?;
        let horizons = cfg.front_horizons();
        let traces: Vec<Vec<Row>> = horizons
            .par_iter()
            .map(|&h| trace(cfg, profile.with_horizon(h)?))
            .collect::<Result<_>>()?;
        let fronts: Vec<HorizonFront> = traces
            .iter()
            .zip(&horizons)
            .filter_map(|(rows, &h)| {
                let last = rows.last().filter(|r| (r.time - h).abs() < 1e-9)?;
                Some(HorizonFront {
                    horizon: h,
                    front: last.front,
                })
            })
            .collect();
        let front_fit = match profile.shape() {
            Shape::Homogeneous => traces
                .iter()
                .zip(&horizons)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .and_then(|(rows, &h)| fit_trace(rows, h)),
            Shape::TwoSpeed { .. } => None,
        };
        let points: Vec<(f64, f64)> = fronts.iter().map(|f| (f.horizon, f.front)).collect();
        let trend = if points.len() >= MIN_HORIZONS {
            Some(log_coefficient_trend(&points, profile.shape())?)
        } else {
            None
        };
        let rows: Vec<Row> = traces.into_iter().flatten().collect();
        write_csv(&out.join(name), &rows)?;
        summaries.push(ProfileSummary {
            profile: profile.label(),
            csv: name.clone(),
            config: cfg.to_toml_string()?,
            fronts,
            predicted_log_coefficient: profile.correction_prediction().log_coefficient,
            front_fit,
            log_coefficient_trend: trend,
        });
    }
    write_json(&out.join("front_summary.json"), &summaries)?;
    for s in &summaries {
        println!("{}: {} horizons -> {}", s.profile, s.fronts.len(), out.join(&s.csv).display());
    }
    Ok(())
}

fn csv_name(cfg: &ExperimentConfig) -> String {
    match cfg.profile.kind {
        ProfileKind::Homogeneous => "front_homogeneous.csv".into(),
        ProfileKind::Plus => format!("front_plus_alpha{}.csv", cfg.profile.alpha),
        ProfileKind::Minus => format!("front_minus_alpha{}.csv", cfg.profile.alpha),
    }
}

/// Front every `front_interval` up to the horizon, and at the horizon.
fn trace(cfg: &ExperimentConfig, profile: SpeedProfile) -> Result<Vec<Row>> {
    let h = profile.horizon();
    let step = cfg.analysis.front_interval;
    let mut times: Vec<f64> = (1..)
        .map(|k| k as f64 * step)
        .take_while(|s| *s < h - 1e-9)
        .collect();
    times.push(h);
    let mut solver = FkppSolver::new(profile, cfg.law.clone(), &InitialCondition::Heaviside, cfg.solver)?;
    let trace = solver.run(h, &times)?;
    Ok(trace
        .times
        .iter()
        .zip(&trace.positions)
        .map(|(&time, &front)| Row {
            time,
            front,
            level: trace.level,
            dx: cfg.solver.dx,
            dt: solver.dt(),
            profile: cfg.profile.kind,
            alpha: cfg.profile.alpha,
            horizon: h,
        })
        .collect())
}

/// Fit over the last four fifths of the trace.
fn fit_trace(rows: &[Row], horizon: f64) -> Option<FrontFit> {
    let from = horizon / 5.0;
    let sel: Vec<&Row> = rows.iter().filter(|r| r.time >= from && r.time > 0.0).collect();
    if sel.len() < 3 {
        return None;
    }
    let design: Vec<Vec<f64>> = sel.iter().map(|r| vec![1.0, r.time, r.time.ln()]).collect();
    let y: Vec<f64> = sel.iter().map(|r| r.front).collect();
    let c = least_squares(&design, &y)?;
    Some(FrontFit {
        from,
        to: horizon,
        slope: c[1],
        log_coefficient: c[2],
        intercept: c[0],
    })
}

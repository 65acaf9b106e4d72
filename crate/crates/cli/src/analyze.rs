use std::fs::File;
use std::io::BufReader;

use serde::Serialize;
use vsbbm_core::config::ExperimentConfig;
use vsbbm_core::numerics::median;
use vsbbm_core::record::{read_jsonl, ReplicateRecord};
use vsbbm_core::runner::{summarize, RunSummary};
use vsbbm_core::stats::{cluster_decomposition, lalley_sellke_fit, localisation_histogram, LocalisationHistogram};
use vsbbm_core::SpeedProfile;

use crate::args::AnalyzeArgs;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_csv, write_json};

/// Largest tolerated fraction of unparsable lines.
pub const MAX_CORRUPT_FRACTION: f64 = 0.01;

#[derive(Debug, Serialize)]
struct LawFitSummary {
    r: f64,
    samples: usize,
    c_hat: f64,
    constant: f64,
    sup_distance: f64,
}

#[derive(Debug, Serialize)]
struct MartingaleSummary {
    time: f64,
    z_samples: usize,
    z_median: Option<f64>,
    /// `(sigma, median)` of the McKean martingale.
    y_medians: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct ClusterRow {
    zeta: f64,
    clusters: usize,
    mean_cluster_size: f64,
}

#[derive(Debug, Serialize)]
struct AnalysisSummary {
    config: String,
    records: usize,
    corrupt_lines: Vec<usize>,
    run: RunSummary,
    law_fit: Option<LawFitSummary>,
    martingales: Vec<MartingaleSummary>,
    localisation: Option<LocalisationHistogram>,
    clusters: Vec<ClusterRow>,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    y: f64,
    empirical: f64,
    model: f64,
}

#[derive(Debug, Serialize)]
struct MartingaleRow {
    replicate: u64,
    time: f64,
    quantity: &'static str,
    sigma: Option<f64>,
    value: f64,
}

#[derive(Debug, Serialize)]
struct BinRow {
    lo: f64,
    hi: f64,
    count: u64,
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    let path = &args.records;
    let file = File::open(path).map_err(CliError::io(path))?;
    let batch = read_jsonl(BufReader::new(file))?;
    if batch.corrupt_fraction() > MAX_CORRUPT_FRACTION {
        return Err(vsbbm_core::Error::Precondition(format!(
            "{}: {} of {} lines corrupt (limit {}%)",
            path.display(),
            batch.corrupt_lines.len(),
            batch.records.len() + batch.corrupt_lines.len(),
            100.0 * MAX_CORRUPT_FRACTION
        ))
        .into());
    }
    if !batch.corrupt_lines.is_empty() {
        eprintln!("skipped {} corrupt lines: {:?}", batch.corrupt_lines.len(), batch.corrupt_lines);
    }
    let cfg = match (&args.config, &batch.header) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(h)) => ExperimentConfig::from_toml_str(&h.config)?,
        (None, None) => {
            return Err(CliError::Usage(format!(
                "{} has no header; pass --config",
                path.display()
            )))
        }
    };
    let records = &batch.records;
    let out = &args.common.out;
    ensure_dir(out)?;

    let law_fit = match cfg.analysis.law_fit_r {
        Some(r) => {
            let (max, z): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter_map(|rec| Some((rec.recentered_max()?, rec.z_at(r)?)))
                .unzip();
            if z.is_empty() {
                return Err(vsbbm_core::Error::Precondition(format!(
                    "law fit requested at r = {r} but no record carries Z there"
                ))
                .into());
            }
            let fit = lalley_sellke_fit(&max, &z, cfg.speed_profile()?.sign())?;
            let rows: Vec<CurveRow> = fit
                .y_grid
                .iter()
                .zip(fit.empirical.iter().zip(&fit.model))
                .map(|(&y, (&empirical, &model))| CurveRow { y, empirical, model })
                .collect();
            write_csv(&out.join("lawfit.csv"), &rows)?;
            Some(LawFitSummary {
                r,
                samples: z.len(),
                c_hat: fit.c_hat,
                constant: fit.constant,
                sup_distance: fit.sup_distance,
            })
        }
        None => None,
    };

    let martingales = martingale_tables(records, &cfg);
    write_csv(&out.join("martingales.csv"), &martingale_rows(records))?;

    let localisation = if records.iter().any(|r| !r.ancestor_offsets.is_empty()) {
        let profile = SpeedProfile::try_from(cfg.profile)?;
        let hist = localisation_histogram(records, &profile, cfg.analysis.top_depth, &cfg.analysis.classify_params, 20);
        let rows: Vec<BinRow> = hist
            .counts
            .iter()
            .enumerate()
            .map(|(i, &count)| BinRow {
                lo: hist.edges[i],
                hi: hist.edges[i + 1],
                count,
            })
            .collect();
        write_csv(&out.join("localisation.csv"), &rows)?;
        Some(hist)
    } else {
        None
    };

    let clusters = cfg
        .analysis
        .label_lags
        .iter()
        .map(|&zeta| {
            let s = cluster_decomposition(records, zeta)?;
            Ok(ClusterRow {
                zeta,
                clusters: s.clusters_per_replicate.iter().map(Vec::len).sum(),
                mean_cluster_size: s.mean_cluster_size,
            })
        })
        .collect::<vsbbm_core::Result<Vec<_>>>()?;
    if !clusters.is_empty() {
        write_csv(&out.join("clusters.csv"), &clusters)?;
    }

    let summary = AnalysisSummary {
        config: cfg.to_toml_string()?,
        records: records.len(),
        corrupt_lines: batch.corrupt_lines.clone(),
        run: summarize(records),
        law_fit,
        martingales,
        localisation,
        clusters,
    };
    write_json(&out.join("analysis.json"), &summary)?;
    println!(
        "analysed {} records ({} corrupt lines skipped) -> {}",
        records.len(),
        summary.corrupt_lines.len(),
        out.display()
    );
    Ok(())
}

fn martingale_tables(records: &[ReplicateRecord], cfg: &ExperimentConfig) -> Vec<MartingaleSummary> {
    cfg.analysis
        .checkpoints
        .iter()
        .map(|&time| {
            let z: Vec<f64> = records.iter().filter_map(|r| r.z_at(time)).collect();
            let y_medians = cfg
                .analysis
                .mckean_sigmas
                .iter()
                .filter_map(|&sigma| {
                    let y: Vec<f64> = records.iter().filter_map(|r| r.y_at(time, sigma)).collect();
                    (!y.is_empty()).then(|| (sigma, median(&y)))
                })
                .collect();
            MartingaleSummary {
                time,
                z_samples: z.len(),
                z_median: (!z.is_empty()).then(|| median(&z)),
                y_medians,
            }
        })
        .collect()
}

fn martingale_rows(records: &[ReplicateRecord]) -> Vec<MartingaleRow> {
    let mut rows = Vec::new();
    for r in records {
        for z in &r.z_at_checkpoints {
            if let Some(value) = z.value {
                rows.push(MartingaleRow {
                    replicate: r.replicate,
                    time: z.time,
                    quantity: "Z",
                    sigma: None,
                    value,
                });
            }
        }
        for y in &r.y_at_checkpoints {
            if let Some(value) = y.value {
                rows.push(MartingaleRow {
                    replicate: r.replicate,
                    time: y.time,
                    quantity: "Y",
                    sigma: Some(y.sigma),
                    value,
                });
            }
        }
    }
    rows
}

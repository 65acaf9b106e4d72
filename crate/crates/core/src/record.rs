//! One JSON line per replicate.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::engine::PathFlags;
use crate::error::Result;
use crate::model::ProfileConfig;

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointValue {
    pub time: f64,
    /// Absent where the quantity is undefined, e.g. after the speed change.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McKeanValue {
    pub time: f64,
    pub sigma: f64,
    pub value: Option<f64>,
}

/// Near-maximal particles: raw positions, and the
/// labels of their ancestors at each `label_times` entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtremalPoints {
    /// Particles more than this far below the maximum were not kept.
    pub retention: f64,
    pub positions: Vec<f64>,
    pub label_times: Vec<f64>,
    /// `labels[j][i]`: ancestor label of point `i` at `label_times[j]`.
    pub labels: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub version: u32,
    pub replicate: u64,
    pub seed: u64,
    pub profile: ProfileConfig,
    pub t: f64,
    /// Raw maximum; absent when the population died out.
    pub max: Option<f64>,
    /// Recentering `m(t)` subtracted by the analyses.
    pub recentering: f64,
    #[serde(rename = "Z_at_checkpoints")]
    pub z_at_checkpoints: Vec<CheckpointValue>,
    #[serde(rename = "Y_at_checkpoints")]
    pub y_at_checkpoints: Vec<McKeanValue>,
    /// `sqrt2 sigma_1 t/2 - x(t/2)` for the ancestors of the particles
    /// within `top_depth` of the maximum, best first.
    pub ancestor_offsets: Vec<f64>,
    /// Distance below the maximum of each of those particles.
    pub top_gaps: Vec<f64>,
    pub top_depth: f64,
    pub flags: Vec<PathFlags>,
    pub pruned_count: u64,
    #[serde(default)]
    pub pruned_mass: f64,
    #[serde(default)]
    pub reruns: u32,
    pub population: u64,
    #[serde(default)]
    pub extremal: ExtremalPoints,
}

impl ReplicateRecord {
    pub fn recentered_max(&self) -> Option<f64> {
        self.max.map(|m| m - self.recentering)
    }

    pub fn z_at(&self, time: f64) -> Option<f64> {
        self.z_at_checkpoints
            .iter()
            .find(|c| (c.time - time).abs() < 1e-9)
            .and_then(|c| c.value)
    }

    pub fn y_at(&self, time: f64, sigma: f64) -> Option<f64> {
        self.y_at_checkpoints
            .iter()
            .find(|c| (c.time - time).abs() < 1e-9 && (c.sigma - sigma).abs() < 1e-12)
            .and_then(|c| c.value)
    }
}

/// First line of a run file: everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: u32,
    pub seed: u64,
    pub replicates: u64,
    /// The configuration as TOML, with command-line overrides applied.
    pub config: String,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: RunHeader,
}

pub fn write_header<W: Write>(mut out: W, header: &RunHeader) -> Result<()> {
    serde_json::to_writer(
        &mut out,
        &HeaderLine {
            header: header.clone(),
        },
    )?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[ReplicateRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Records that parsed, plus the 1-based line numbers that did not.
#[derive(Debug, Clone, Default)]
pub struct JsonlBatch {
    pub header: Option<RunHeader>,
    pub records: Vec<ReplicateRecord>,
    pub corrupt_lines: Vec<usize>,
}

impl JsonlBatch {
    pub fn corrupt_fraction(&self) -> f64 {
        let total = self.records.len() + self.corrupt_lines.len();
        if total == 0 {
            0.0
        } else {
            self.corrupt_lines.len() as f64 / total as f64
        }
    }
}

/// Parse a JSONL stream, skipping blank lines and collecting unparsable
/// ones. A header is recognised only on the first non-blank line.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<JsonlBatch> {
    let mut batch = JsonlBatch::default();
    let mut first = true;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(&line) {
                batch.header = Some(h.header);
                continue;
            }
        }
        match serde_json::from_str::<ReplicateRecord>(&line) {
            Ok(r) => batch.records.push(r),
            Err(_) => batch.corrupt_lines.push(i + 1),
        }
    }
    Ok(batch)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::model::SpeedProfile;

    pub fn record(max: f64) -> ReplicateRecord {
        ReplicateRecord {
            version: RECORD_VERSION,
            replicate: 0,
            seed: 1,
            profile: SpeedProfile::homogeneous(12.0).unwrap().into(),
            t: 12.0,
            max: Some(max),
            recentering: 0.0,
            z_at_checkpoints: vec![],
            y_at_checkpoints: vec![],
            ancestor_offsets: vec![],
            top_gaps: vec![],
            top_depth: 0.0,
            flags: vec![],
            pruned_count: 0,
            pruned_mass: 0.0,
            reruns: 0,
            population: 1,
            extremal: ExtremalPoints::default(),
        }
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::ReplicateRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Leader position minus the recentering.
    pub leader_offset: f64,
    /// Leader minus each other member, ascending.
    pub gaps: Vec<f64>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.gaps.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub clusters_per_replicate: Vec<Vec<Cluster>>,
    pub mean_cluster_size: f64,
    /// Within-cluster gaps pooled over all clusters.
    pub gaps: Vec<f64>,
}

/// Group each record's extremal points by their ancestor at time `t - zeta`.
pub fn cluster_decomposition(records: &[ReplicateRecord], zeta: f64) -> Result<ClusterSummary> {
    let mut clusters_per_replicate = Vec::with_capacity(records.len());
    for r in records {
        let points = &r.extremal.positions;
        let groups: Vec<Vec<usize>> = if zeta <= 0.0 {
            (0..points.len()).map(|i| vec![i]).collect()
        } else {
            let when = r.t - zeta;
            let j = r
                .extremal
                .label_times
                .iter()
                .position(|s| (s - when).abs() < 1e-9)
                .ok_or_else(|| {
                    Error::Precondition(format!(
                        "replicate {} has no genealogy snapshot at {when}",
                        r.replicate
                    ))
                })?;
            let labels = &r.extremal.labels[j];
            let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (i, &l) in labels.iter().enumerate() {
                by_label.entry(l).or_default().push(i);
            }
            by_label.into_values().collect()
        };
        let mut clusters: Vec<Cluster> = groups
            .into_iter()
            .map(|members| {
                let leader = members
                    .iter()
                    .map(|&i| points[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut gaps: Vec<f64> = members.iter().map(|&i| leader - points[i]).collect();
                gaps.sort_by(f64::total_cmp);
                // the leader's own zero gap
                gaps.remove(0);
                Cluster {
                    leader_offset: leader - r.recentering,
                    gaps,
                }
            })
            .collect();
        clusters.sort_by(|a, b| b.leader_offset.total_cmp(&a.leader_offset));
        clusters_per_replicate.push(clusters);
    }
    let all: Vec<&Cluster> = clusters_per_replicate.iter().flatten().collect();
    let mean_cluster_size = if all.is_empty() {
        0.0
    } else {
        all.iter().map(|c| c.size() as f64).sum::<f64>() / all.len() as f64
    };
    let gaps = all.iter().flat_map(|c| c.gaps.iter().copied()).collect();
    Ok(ClusterSummary {
        clusters_per_replicate,
        mean_cluster_size,
        gaps,
    })
}

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::engine::ClassifyParams;
use crate::model::{Shape, Sign, SpeedProfile};
use crate::numerics::median;
use crate::record::ReplicateRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalisationHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub samples: usize,
    pub median_offset: Option<f64>,
    /// Fraction of offsets whose ancestor falls outside the window.
    pub exceedance_fraction: f64,
}

/// Whether an ancestor with offset `o = sqrt2 sigma_1 t/2 - x(t/2)` lies in
/// the window used by [`crate::engine::classify_path`].
pub fn offset_in_window(profile: &SpeedProfile, params: &ClassifyParams, offset: f64) -> bool {
    let t = profile.horizon();
    let s1 = profile.sigma1();
    match profile.shape() {
        Shape::TwoSpeed {
            sign: Sign::Plus,
            alpha,
        } => {
            let scale = t.powf(params.gamma.unwrap_or(alpha));
            let o = offset / s1;
            o >= params.b * scale && o <= params.a * scale
        }
        _ => {
            let half = profile.change_time();
            let rescaled = SQRT_2 * half - offset / s1;
            (rescaled - SQRT_2 * s1 * half).abs() <= params.a * t.sqrt()
        }
    }
}

/// Histogram of the `t/2` ancestor offsets of particles within `depth` of the
/// maximum, pooled over replicates.
pub fn localisation_histogram(
    records: &[ReplicateRecord],
    profile: &SpeedProfile,
    depth: f64,
    params: &ClassifyParams,
    bins: usize,
) -> LocalisationHistogram {
    let offsets: Vec<f64> = records
        .iter()
        .flat_map(|r| {
            r.ancestor_offsets
                .iter()
                .zip(&r.top_gaps)
                .filter(|(_, g)| **g <= depth)
                .map(|(o, _)| *o)
        })
        .collect();
    let bins = bins.max(1);
    if offsets.is_empty() {
        return LocalisationHistogram {
            edges: Vec::new(),
            counts: Vec::new(),
            samples: 0,
            median_offset: None,
            exceedance_fraction: 0.0,
        };
    }
    let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &o in &offsets {
        let i = (((o - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let outside = offsets
        .iter()
        .filter(|&&o| !offset_in_window(profile, params, o))
        .count();
    LocalisationHistogram {
        edges,
        counts,
        samples: offsets.len(),
        median_offset: Some(median(&offsets)),
        exceedance_fraction: outside as f64 / offsets.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::fixtures;

    fn rec(offsets: &[f64], gaps: &[f64]) -> ReplicateRecord {
        let mut r = fixtures::record(0.0);
        r.ancestor_offsets = offsets.to_vec();
        r.top_gaps = gaps.to_vec();
        r
    }

    #[test]
    fn unlimited_depth_keeps_everything() {
        let p = SpeedProfile::homogeneous(12.0).unwrap();
        let recs = vec![rec(&[1.0, 2.0, 5.0], &[0.0, 3.0, 9.0]), rec(&[4.0], &[0.0])];
        let all = localisation_histogram(&recs, &p, f64::INFINITY, &ClassifyParams::default(), 4);
        assert_eq!(all.samples, 4);
        assert_eq!(all.counts.iter().sum::<u64>(), 4);
        assert_eq!(all.median_offset, Some(3.0));
        let top = localisation_histogram(&recs, &p, 1.0, &ClassifyParams::default(), 4);
        assert_eq!(top.samples, 2);
        assert_eq!(top.median_offset, Some(2.5));
    }

    #[test]
    fn plus_window_in_offset_terms() {
        let p = SpeedProfile::two_speed(Sign::Plus, 0.3, 30.0).unwrap();
        let q = ClassifyParams::default();
        let scale = 30f64.powf(0.3);
        let mid = 0.5 * (q.a + q.b) * scale * p.sigma1();
        assert!(offset_in_window(&p, &q, mid));
        assert!(!offset_in_window(&p, &q, 0.0));
    }

    #[test]
    fn empty_input() {
        let p = SpeedProfile::homogeneous(12.0).unwrap();
        let h = localisation_histogram(&[], &p, 1.0, &ClassifyParams::default(), 4);
        assert_eq!(h.samples, 0);
        assert!(h.median_offset.is_none());
    }
}

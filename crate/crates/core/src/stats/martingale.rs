use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::record::ReplicateRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSample {
    pub checkpoint_time: f64,
    pub z_value: f64,
    pub y_value: f64,
    pub sigma_used: f64,
}

const FIXED_SCALE: f64 = (1u128 << 80) as f64;
const FIXED_LIMIT: f64 = (1u64 << 40) as f64;

/// Sum that does not depend on the order of `terms`: each term is rounded to
/// a multiple of `2^-80` and accumulated exactly. Falls back to a sorted
/// pairwise sum when a term is too large for the fixed-point range.
pub fn order_free_sum(terms: &[f64]) -> f64 {
    if terms.iter().all(|t| t.abs() < FIXED_LIMIT) {
        let acc: i128 = terms.iter().map(|t| (t * FIXED_SCALE) as i128).sum();
        acc as f64 / FIXED_SCALE
    } else {
        let mut sorted = terms.to_vec();
        sorted.sort_by(f64::total_cmp);
        pairwise_sum(&sorted)
    }
}

/// `sum_k (sqrt2 r - x_k) exp(sqrt2 (x_k - sqrt2 r))`.
pub fn derivative_martingale(positions: &[f64], r: f64) -> Result<f64> {
    derivative_martingale_scaled(positions, r, 1.0)
}

/// `sum_k rho (sqrt2 r - x_k) exp(-sqrt2 rho (sqrt2 r - x_k))`, the variant
/// in which the distance to the line is stretched by `rho`.
pub fn derivative_martingale_scaled(positions: &[f64], r: f64, rho: f64) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let line = SQRT_2 * r;
    let terms: Vec<f64> = positions
        .iter()
        .map(|&x| {
            let gap = rho * (line - x);
            gap * (-SQRT_2 * gap).exp()
        })
        .collect();
    Ok(order_free_sum(&terms))
}

/// `sum_k exp(sqrt2 sigma x_k - (1 + sigma^2) r)`.
pub fn mckean_martingale(positions: &[f64], r: f64, sigma: f64) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let drift = (1.0 + sigma * sigma) * r;
    let terms: Vec<f64> = positions
        .iter()
        .map(|&x| (SQRT_2 * sigma * x - drift).exp())
        .collect();
    Ok(order_free_sum(&terms))
}

/// Pair up the derivative and McKean values a record carries at each
/// checkpoint where both are defined.
pub fn martingale_samples(record: &ReplicateRecord) -> Vec<MartingaleSample> {
    let mut out = Vec::new();
    for z in &record.z_at_checkpoints {
        let Some(zv) = z.value else { continue };
        for y in record
            .y_at_checkpoints
            .iter()
            .filter(|y| (y.time - z.time).abs() < 1e-9)
        {
            if let Some(yv) = y.value {
                out.push(MartingaleSample {
                    checkpoint_time: z.time,
                    z_value: zv,
                    y_value: yv,
                    sigma_used: y.sigma,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{fixtures, CheckpointValue, McKeanValue};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_particle_values() {
        let r = 5.0;
        assert_eq!(derivative_martingale(&[SQRT_2 * r], r).unwrap(), 0.0);
        assert_abs_diff_eq!(
            derivative_martingale(&[SQRT_2 * r - 1.0], r).unwrap(),
            0.24312,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(mckean_martingale(&[SQRT_2 * r], r, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(mckean_martingale(&[0.0], 0.0, 0.7).unwrap(), 1.0);
        assert!(matches!(derivative_martingale(&[], 1.0), Err(Error::EmptyPopulation)));
        assert!(mckean_martingale(&[], 1.0, 1.0).is_err());
    }

    #[test]
    fn stretched_variant_reduces_to_standard() {
        let xs = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(
            derivative_martingale_scaled(&xs, 3.0, 1.0).unwrap(),
            derivative_martingale(&xs, 3.0).unwrap()
        );
    }

    #[test]
    fn samples_join_on_time() {
        let mut rec = fixtures::record(1.0);
        rec.z_at_checkpoints = vec![
            CheckpointValue { time: 4.0, value: Some(0.3) },
            CheckpointValue { time: 8.0, value: None },
        ];
        rec.y_at_checkpoints = vec![
            McKeanValue { time: 4.0, sigma: 1.0, value: Some(0.1) },
            McKeanValue { time: 8.0, sigma: 1.0, value: Some(0.2) },
        ];
        let s = martingale_samples(&rec);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].checkpoint_time, 4.0);
        assert_eq!(s[0].y_value, 0.1);
    }

    proptest! {
        #[test]
        fn sums_ignore_particle_order(mut xs in prop::collection::vec(-20.0..15.0f64, 1..200), r in 1.0..10.0f64, seed in any::<u64>()) {
            let z = derivative_martingale(&xs, r).unwrap();
            let y = mckean_martingale(&xs, r, 1.0).unwrap();
            // deterministic shuffle
            let n = xs.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = crate::rng::mix64(s);
                xs.swap(i, (s % (i as u64 + 1)) as usize);
            }
            prop_assert_eq!(z, derivative_martingale(&xs, r).unwrap());
            prop_assert_eq!(y, mckean_martingale(&xs, r, 1.0).unwrap());
        }
    }
}

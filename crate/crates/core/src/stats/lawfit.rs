use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Sign;
use crate::numerics::Ecdf;

/// Fit of `F(y) = E_Z exp(-c Z e^{-sqrt2 y})` to an empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFit {
    pub c_hat: f64,
    pub sup_distance: f64,
    pub y_grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub model: Vec<f64>,
    /// `c_hat` converted to the constant multiplying `Z` in the limit law of
    /// the given sign: `c = 2C/sqrt(pi)` for `Plus`, `c = C` otherwise.
    pub constant: f64,
}

/// 41 points on `[-4, 6]`.
pub fn default_y_grid() -> Vec<f64> {
    (0..41).map(|i| -4.0 + 0.25 * i as f64).collect()
}

/// Distinct non-negative `Z` values with multiplicities. Negative values
/// are clamped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZMixture {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl ZMixture {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() || samples.iter().all(|z| !(*z > 0.0)) {
            return Err(Error::Precondition(
                "Z samples are degenerate (none positive)".into(),
            ));
        }
        let mut sorted: Vec<f64> = samples.iter().map(|z| z.max(0.0)).collect();
        sorted.sort_by(f64::total_cmp);
        let total = sorted.len() as f64;
        let mut values: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for z in sorted {
            if values.last() == Some(&z) {
                *weights.last_mut().unwrap() += 1.0 / total;
            } else {
                values.push(z);
                weights.push(1.0 / total);
            }
        }
        Ok(Self { values, weights })
    }

    /// `E_Z exp(-c Z e^{-sqrt2 y})`.
    pub fn cdf(&self, c: f64, y: f64) -> f64 {
        let s = c * (-SQRT_2 * y).exp();
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * (-s * z).exp())
            .sum()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            values: self.values.iter().map(|z| z * lambda).collect(),
            weights: self.weights.clone(),
        }
    }
}

pub fn lalley_sellke_fit(
    max_samples: &[f64],
    z_samples: &[f64],
    sign: Option<Sign>,
) -> Result<LawFit> {
    lalley_sellke_fit_on(max_samples, z_samples, sign, &default_y_grid())
}

/// Minimise the sup distance over `y_grid` in `ln c` by a coarse scan
/// followed by golden-section refinement from the three best scan points.
pub fn lalley_sellke_fit_on(
    max_samples: &[f64],
    z_samples: &[f64],
    sign: Option<Sign>,
    y_grid: &[f64],
) -> Result<LawFit> {
    if max_samples.is_empty() {
        return Err(Error::Precondition("no maxima to fit".into()));
    }
    if y_grid.is_empty() {
        return Err(Error::Precondition("empty y grid".into()));
    }
    let mixture = ZMixture::new(z_samples)?;
    let ecdf = Ecdf::new(max_samples);
    let empirical: Vec<f64> = y_grid.iter().map(|&y| ecdf.eval(y)).collect();
    let objective = |log_c: f64| {
        let c = log_c.exp();
        y_grid
            .iter()
            .zip(&empirical)
            .map(|(&y, f)| (mixture.cdf(c, y) - f).abs())
            .fold(0.0, f64::max)
    };

    const STEP: f64 = 0.2;
    let scan: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let lc = -10.0 + STEP * i as f64;
            (lc, objective(lc))
        })
        .collect();
    let mut order: Vec<usize> = (0..scan.len()).collect();
    order.sort_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1));
    let (mut best_lc, mut best) = scan[order[0]];
    for &i in order.iter().take(3) {
        let (lc, val) = golden_section(&objective, scan[i].0 - STEP, scan[i].0 + STEP, 1e-7);
        if val < best {
            best = val;
            best_lc = lc;
        }
    }
    let c_hat = best_lc.exp();
    let model: Vec<f64> = y_grid.iter().map(|&y| mixture.cdf(c_hat, y)).collect();
    let constant = match sign {
        Some(Sign::Plus) => c_hat * PI.sqrt() / 2.0,
        _ => c_hat,
    };
    Ok(LawFit {
        c_hat,
        sup_distance: best,
        y_grid: y_grid.to_vec(),
        empirical,
        model,
        constant,
    })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Draw from `P(M <= y) = exp(-c z e^{-sqrt2 y})` given a uniform in `(0, 1)`.
pub fn sample_model_law(c: f64, z: f64, uniform: f64) -> f64 {
    ((c * z).ln() - (-uniform.ln()).ln()) / SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::gumbel_double_log;
    use crate::rng::LineageRng;

    fn synthetic(c: f64, zs: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = LineageRng::new(seed);
        (0..n)
            .map(|i| {
                let u = rng.uniform().max(f64::MIN_POSITIVE);
                sample_model_law(c, zs[i % zs.len()], u)
            })
            .collect()
    }

    #[test]
    fn recovers_c_from_model_law() {
        let maxima = synthetic(1.0, &[1.0], 100_000, 3);
        let fit = lalley_sellke_fit(&maxima, &[1.0], None).unwrap();
        assert!((fit.c_hat - 1.0).abs() < 0.05, "{}", fit.c_hat);
        assert!(fit.sup_distance <= 0.01);
        assert_eq!(fit.y_grid.len(), 41);
    }

    #[test]
    fn unit_z_gives_gumbel_line() {
        let mix = ZMixture::new(&[1.0]).unwrap();
        let cdf: Vec<(f64, f64)> = default_y_grid().iter().map(|&y| (y, mix.cdf(1.0, y))).collect();
        let slope = gumbel_double_log(&cdf).slope_on(-1.0, 3.0).unwrap();
        assert!((slope - SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn fit_scales_inversely_with_z() {
        let zs: Vec<f64> = (1..=200).map(|i| 0.2 + i as f64 / 100.0).collect();
        let maxima = synthetic(0.7, &zs, 40_000, 9);
        let base = lalley_sellke_fit(&maxima, &zs, None).unwrap();
        for lambda in [0.5, 2.0] {
            let scaled: Vec<f64> = zs.iter().map(|z| z * lambda).collect();
            let fit = lalley_sellke_fit(&maxima, &scaled, None).unwrap();
            let ratio = fit.c_hat * lambda / base.c_hat;
            assert!((ratio - 1.0).abs() < 0.01, "lambda {lambda}: ratio {ratio}");
        }
    }

    #[test]
    fn degenerate_z_is_rejected() {
        assert!(lalley_sellke_fit(&[0.0, 1.0], &[0.0, -1.0], None).is_err());
        assert!(lalley_sellke_fit(&[0.0, 1.0], &[], None).is_err());
    }

    #[test]
    fn constant_follows_sign_convention() {
        let maxima = synthetic(1.0, &[1.0], 20_000, 4);
        let plus = lalley_sellke_fit(&maxima, &[1.0], Some(Sign::Plus)).unwrap();
        let minus = lalley_sellke_fit(&maxima, &[1.0], Some(Sign::Minus)).unwrap();
        assert_eq!(minus.constant, minus.c_hat);
        assert!((plus.constant - plus.c_hat * PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_z_clamped() {
        let m = ZMixture::new(&[-1.0, 1.0]).unwrap();
        // half the mass sits at Z = 0, which never lowers the CDF
        assert!((m.cdf(1.0, -50.0) - 0.5).abs() < 1e-12);
    }
}

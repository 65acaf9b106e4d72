use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Shape, SpeedProfile};
use crate::numerics::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    /// Fitted coefficient of `ln t`.
    pub coefficient: f64,
    pub standard_error: f64,
    pub intercept: f64,
    pub horizons: usize,
    pub smallest_horizon: f64,
}

pub const MIN_HORIZONS: usize = 4;

/// The part of the front linear in `t`: `sqrt2 (sigma_1 + sigma_2) t / 2` for
/// decreasing speeds below `alpha = 1/2`, `sqrt2 t` otherwise.
pub fn leading_term(shape: Shape, t: f64) -> Result<f64> {
    let profile = SpeedProfile::new(shape, t)?;
    Ok(profile.correction_prediction().leading_slope(t) * t)
}

fn fit(points: &[(f64, f64)], shape: Shape) -> Result<LogFit> {
    let mut x = Vec::with_capacity(points.len());
    let mut y = Vec::with_capacity(points.len());
    for &(t, value) in points {
        x.push(t.ln());
        y.push(value - leading_term(shape, t)?);
    }
    let line = fit_line(&x, &y)
        .ok_or_else(|| Error::Precondition("horizons must be distinct".into()))?;
    Ok(LogFit {
        coefficient: line.slope,
        standard_error: line.slope_se,
        intercept: line.intercept,
        horizons: points.len(),
        smallest_horizon: points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
    })
}

/// Least squares of `value - leading term` on `ln t` over `(t, value)`
/// pairs from at least four horizons.
pub fn log_coefficient_regression(points: &[(f64, f64)], shape: Shape) -> Result<LogFit> {
    if points.len() < MIN_HORIZONS {
        return Err(Error::Precondition(format!(
            "log-coefficient fit needs at least {MIN_HORIZONS} horizons, got {}",
            points.len()
        )));
    }
    fit(points, shape)
}

/// The full fit followed by refits with the smallest horizon removed, down
/// to two horizons.
pub fn log_coefficient_trend(points: &[(f64, f64)], shape: Shape) -> Result<Vec<LogFit>> {
    let first = log_coefficient_regression(points, shape)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![first];
    for drop in 1..=sorted.len() - 2 {
        out.push(fit(&sorted[drop..], shape)?);
    }
    Ok(out)
}

/// `true` when every successive fit is at least as close to `target` as the
/// one before, moving in the direction of `target`.
pub fn moves_toward(fits: &[LogFit], target: f64) -> bool {
    fits.windows(2).all(|w| {
        let (a, b) = (w[0].coefficient, w[1].coefficient);
        (b - target).abs() <= (a - target).abs() && (b - a) * (target - a) >= 0.0
    })
}

//! Closed-form probabilities used as independent checks on the simulator.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{domain, Result};
use crate::model::SpeedProfile;
use crate::numerics::normal_upper_tail;

/// Probability that a Brownian bridge from `-a` to `-b` over `[0, span]`
/// stays strictly below zero: `1 - exp(-2ab/span)`.
pub fn bridge_stay_below(a: f64, b: f64, span: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(domain(format!("bridge endpoints must be >= 0, got a={a}, b={b}")));
    }
    if !(span > 0.0) {
        return Err(domain(format!("bridge span must be > 0, got {span}")));
    }
    Ok(-(-2.0 * a * b / span).exp_m1())
}

/// Leading-order probability `sqrt(2/pi) sqrt(r) y / (span - r)` that a
/// bridge of length `span`, started on the barrier and ending `y` below it,
/// stays below the barrier after time `r`.
///
/// Asymptotic only: valid for `y << sqrt(span)` and `r << span`.
pub fn bridge_stay_below_from_r(y: f64, r: f64, span: f64) -> f64 {
    (2.0 / PI).sqrt() * r.sqrt() * y / (span - r)
}

/// Upper bound on `P(max_k x_k(t) > sqrt(2) t + x)` for standard BBM.
pub fn gaussian_max_bound(x: f64, t: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("x must be >= 0, got {x}")));
    }
    if !(t > 0.0) {
        return Err(domain(format!("t must be > 0, got {t}")));
    }
    let num = (-SQRT_2 * x - x * x / (2.0 * t)).exp();
    let den = (2.0 * PI).sqrt() * ((2.0 * t).sqrt() + x / t.sqrt());
    Ok(num / den)
}

/// Expected number of particles above level `a` at time `s`:
/// `e^s P(N > a / sqrt(Sigma^2_t(s)))`.
pub fn many_to_one_level_count(profile: &SpeedProfile, s: f64, a: f64) -> Result<f64> {
    let var = profile.cumulative_speed(s)?;
    let tail = if var == 0.0 {
        if a < 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        normal_upper_tail(a / var.sqrt())
    };
    Ok(s.exp() * tail)
}

/// Double-log transform of an empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelCurve {
    /// `(y, -ln(-ln F(y)))` for grid points with `0 < F < 1`.
    pub points: Vec<(f64, f64)>,
    /// Grid points dropped because `F` was 0 or 1.
    pub dropped: Vec<f64>,
}

impl GumbelCurve {
    /// Least-squares slope over points with `y` in `[lo, hi]`.
    pub fn slope_on(&self, lo: f64, hi: f64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .points
            .iter()
            .filter(|(y, _)| (lo..=hi).contains(y))
            .copied()
            .unzip();
        crate::numerics::fit_line(&x, &y).map(|f| f.slope)
    }
}

/// `(y, F(y))` pairs to `(y, -ln(-ln F(y)))`; a Gumbel law with scale `1/k`
/// maps to a line of slope `k`.
pub fn gumbel_double_log(cdf: &[(f64, f64)]) -> GumbelCurve {
    let mut points = Vec::with_capacity(cdf.len());
    let mut dropped = Vec::new();
    for &(y, f) in cdf {
        if f > 0.0 && f < 1.0 {
            points.push((y, -(-f.ln()).ln()));
        } else {
            dropped.push(y);
        }
    }
    GumbelCurve { points, dropped }
}

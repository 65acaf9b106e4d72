use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::field::FkppField;
use super::solver::{FkppSolver, GridSpec, InitialCondition};
use crate::error::Result;
use crate::model::{BranchingLaw, SpeedProfile, BRAMSON_LOG_COEFFICIENT};

/// Integrand weight in the constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CVariant {
    /// `sqrt(2/pi) int_0^inf u(r, y + sqrt2 r) e^{sqrt2 y} y dy`
    WithYWeight,
    /// Same integral without the factor `y`.
    WithoutYWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CEstimate {
    pub r: f64,
    pub value: f64,
    /// Integrand at the window edge was below `1e-8`.
    pub decayed: bool,
}

const DECAY_THRESHOLD: f64 = 1e-8;

/// Quadrature estimate of `C` from the field at time `r = field.time`.
pub fn estimate_c(field: &FkppField, variant: CVariant) -> CEstimate {
    let r = field.time;
    let origin = SQRT_2 * r;
    let weight = |y: f64| match variant {
        CVariant::WithYWeight => y,
        CVariant::WithoutYWeight => 1.0,
    };
    let integrand = |y: f64, u: f64| u * (SQRT_2 * y).exp() * weight(y);

    let first = ((origin - field.left_edge) / field.dx).floor() as isize + 1;
    let first = first.max(0) as usize;
    let mut total = 0.0;
    let mut prev_y = 0.0;
    let mut prev_g = integrand(0.0, field.value_at(origin));
    let mut last_g = prev_g;
    for i in first..field.len() {
        let y = field.x(i) - origin;
        let g = integrand(y, field.values[i]);
        total += 0.5 * (prev_g + g) * (y - prev_y);
        prev_y = y;
        prev_g = g;
        last_g = g;
    }
    CEstimate {
        r,
        value: (2.0 / PI).sqrt() * total,
        decayed: last_g.abs() < DECAY_THRESHOLD,
    }
}

/// Solve a homogeneous problem and estimate `C` at each `r` in `checkpoints`.
/// Each entry carries the relative change from the previous checkpoint.
pub fn estimate_c_series(
    law: &BranchingLaw,
    init: &InitialCondition,
    grid: GridSpec,
    checkpoints: &[f64],
    variant: CVariant,
) -> Result<Vec<(CEstimate, Option<f64>)>> {
    let last = checkpoints.iter().copied().fold(0.0, f64::max);
    let profile = SpeedProfile::homogeneous(last)?;
    let mut solver = FkppSolver::new(profile, law.clone(), init, grid)?;
    let mut out: Vec<(CEstimate, Option<f64>)> = Vec::with_capacity(checkpoints.len());
    solver.run_visiting(checkpoints, |field| {
        let est = estimate_c(field, variant);
        let change = out
            .last()
            .map(|(prev, _)| (est.value - prev.value).abs() / prev.value.abs());
        out.push((est, change));
    })?;
    Ok(out)
}

/// `(x, e^{sqrt2 x} e^{x^2/2t} x^-1 u(t, x + sqrt2 t - 3/(2 sqrt2) ln t))` for
/// each `x`, which should plateau near `C` for `1 << x << t`.
pub fn tail_asymptotics_diagnostic(field: &FkppField, t: f64, xs: &[f64]) -> Vec<(f64, f64)> {
    let shift = SQRT_2 * t - BRAMSON_LOG_COEFFICIENT * t.ln();
    xs.iter()
        .map(|&x| {
            let u = field.value_at(x + shift);
            let factor = (SQRT_2 * x + x * x / (2.0 * t)).exp() / x;
            (x, factor * u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_gives_zero() {
        let field = FkppField {
            values: vec![0.0; 100],
            left_edge: 0.0,
            dx: 0.1,
            time: 5.0,
            window_shift_total: 0.0,
            left_boundary: 0.0,
            right_boundary: 0.0,
        };
        let est = estimate_c(&field, CVariant::WithYWeight);
        assert_eq!(est.value, 0.0);
        assert!(est.decayed);
        let diag = tail_asymptotics_diagnostic(&field, 5.0, &[1.0, 2.0]);
        assert!(diag.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn quadrature_of_known_integrand() {
        // u(r, y + sqrt2 r) = e^{-2 sqrt2 y}: int_0^inf e^{-sqrt2 y} dy = 1/sqrt2
        let r: f64 = 2.0;
        let dx = 0.001;
        let left = SQRT_2 * r - 1.0;
        let values: Vec<f64> = (0..40_000)
            .map(|i| {
                let y = left + i as f64 * dx - SQRT_2 * r;
                (-2.0 * SQRT_2 * y).exp().min(1.0)
            })
            .collect();
        let field = FkppField {
            values,
            left_edge: left,
            dx,
            time: r,
            window_shift_total: 0.0,
            left_boundary: 1.0,
            right_boundary: 0.0,
        };
        let est = estimate_c(&field, CVariant::WithoutYWeight);
        let exact = (2.0 / PI).sqrt() / SQRT_2;
        assert!((est.value - exact).abs() < 1e-5, "{} vs {exact}", est.value);
        let with_y = estimate_c(&field, CVariant::WithYWeight);
        // int y e^{-sqrt2 y} = 1/2
        assert!((with_y.value - (2.0 / PI).sqrt() * 0.5).abs() < 1e-5);
    }
}

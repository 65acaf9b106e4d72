use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fkpp::{FkppSolver, GridSpec, InitialCondition};
use crate::model::{BranchingLaw, SpeedProfile};
use crate::numerics::{fit_line, LineFit};
use crate::record::ReplicateRecord;

/// `phi(x) = sum_l c_l 1{x >= u_l}` with `c_l >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// `(c_l, u_l)` pairs.
    pub steps: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.iter().any(|(c, u)| !(*c >= 0.0) || !u.is_finite()) {
            return Err(Error::Domain("step weights must be >= 0 with finite thresholds".into()));
        }
        Ok(Self { steps })
    }

    pub fn zero() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn indicator(weight: f64, threshold: f64) -> Result<Self> {
        Self::new(vec![(weight, threshold)])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.steps
            .iter()
            .filter(|(_, u)| x >= *u)
            .map(|(c, _)| c)
            .sum()
    }

    /// Smallest threshold carrying positive weight.
    pub fn support_start(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter(|(c, _)| *c > 0.0)
            .map(|(_, u)| *u)
            .min_by(f64::total_cmp)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        InitialCondition::StepSum(self.steps.clone())
    }
}

/// Empirical `E exp(-sum_k phi(x_k - m - y))` over the retained extremal
/// points of each record.
pub fn laplace_functional(records: &[ReplicateRecord], phi: &StepFunction, y: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Precondition("no records".into()));
    }
    let start = phi.support_start();
    let mut total = 0.0;
    for r in records {
        let max = r
            .max
            .ok_or_else(|| Error::Precondition(format!("replicate {} has no maximum", r.replicate)))?;
        let shift = r.recentering + y;
        if let Some(u) = start {
            if shift + u < max - r.extremal.retention {
                return Err(Error::Precondition(format!(
                    "step at {u} reaches below the retention cutoff of replicate {}",
                    r.replicate
                )));
            }
        }
        let load: f64 = r
            .extremal
            .positions
            .iter()
            .map(|&x| phi.eval(x - shift))
            .sum();
        total += (-load).exp();
    }
    Ok(total / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCurve {
    pub y: Vec<f64>,
    pub psi: Vec<f64>,
    /// Line through `(y, ln(-ln psi))` over points with `0 < psi < 1`.
    pub fit: Option<LineFit>,
}

/// Laplace functional along `ys` and the slope of `ln(-ln psi)` in `y`,
/// which is `-sqrt2` for the limiting law.
pub fn laplace_y_fit(records: &[ReplicateRecord], phi: &StepFunction, ys: &[f64]) -> Result<LaplaceCurve> {
    let psi: Vec<f64> = ys
        .iter()
        .map(|&y| laplace_functional(records, phi, y))
        .collect::<Result<_>>()?;
    Ok(LaplaceCurve {
        y: ys.to_vec(),
        fit: double_log_fit(ys, &psi),
        psi,
    })
}

fn double_log_fit(ys: &[f64], psi: &[f64]) -> Option<LineFit> {
    let (x, v): (Vec<f64>, Vec<f64>) = ys
        .iter()
        .zip(psi)
        .filter(|(_, p)| **p > 0.0 && **p < 1.0)
        .map(|(y, p)| (*y, (-p.ln()).ln()))
        .unzip();
    fit_line(&x, &v)
}

/// The same functional from the PDE: `1 - u(t, m + y)` with
/// `u(0, x) = 1 - exp(-phi(-x))`.
pub fn laplace_functional_pde(
    profile: SpeedProfile,
    law: &BranchingLaw,
    phi: &StepFunction,
    recentering: f64,
    ys: &[f64],
    grid: GridSpec,
) -> Result<LaplaceCurve> {
    let mut solver = FkppSolver::new(profile, law.clone(), &phi.initial_condition(), grid)?;
    solver.advance_to(profile.horizon())?;
    let psi: Vec<f64> = ys
        .iter()
        .map(|&y| 1.0 - solver.field().value_at(recentering + y))
        .collect();
    Ok(LaplaceCurve {
        y: ys.to_vec(),
        fit: double_log_fit(ys, &psi),
        psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::fixtures;

    fn rec(points: &[f64]) -> ReplicateRecord {
        let max = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut r = fixtures::record(max);
        r.extremal.positions = points.to_vec();
        r.extremal.retention = 10.0;
        r
    }

    #[test]
    fn zero_phi_is_one() {
        let recs = vec![rec(&[1.0, 0.5]), rec(&[3.0])];
        assert_eq!(laplace_functional(&recs, &StepFunction::zero(), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn large_weight_indicator_is_max_cdf() {
        let recs = vec![rec(&[1.0, 0.5]), rec(&[3.0]), rec(&[-0.5, -1.0])];
        let phi = StepFunction::indicator(50.0, 0.0).unwrap();
        // P(max <= 2) over these records = 2/3, exactly up to e^-50
        let psi = laplace_functional(&recs, &phi, 2.0 - 1e-9).unwrap();
        assert!((psi - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_too_high_is_an_error() {
        let recs = vec![rec(&[5.0])];
        let phi = StepFunction::indicator(1.0, -20.0).unwrap();
        assert!(laplace_functional(&recs, &phi, 0.0).is_err());
    }

    #[test]
    fn monotone_in_weight_and_threshold() {
        let recs: Vec<ReplicateRecord> = (0..20).map(|i| rec(&[i as f64 * 0.3 - 2.0, i as f64 * 0.1 - 3.0])).collect();
        let mut last = 1.0;
        for c in [0.1, 0.5, 1.0, 5.0] {
            let psi = laplace_functional(&recs, &StepFunction::indicator(c, 0.0).unwrap(), 0.0).unwrap();
            assert!(psi <= last);
            last = psi;
        }
        let mut last = 0.0;
        for u in [-2.0, -1.0, 0.0, 1.0] {
            let psi = laplace_functional(&recs, &StepFunction::indicator(1.0, u).unwrap(), 0.0).unwrap();
            assert!(psi >= last);
            last = psi;
        }
    }

    #[test]
    fn step_function_rejects_negative_weights() {
        assert!(StepFunction::new(vec![(-1.0, 0.0)]).is_err());
        let phi = StepFunction::new(vec![(1.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_eq!(phi.eval(0.5), 1.0);
        assert_eq!(phi.eval(1.0), 3.0);
        assert_eq!(phi.support_start(), Some(0.0));
    }
}

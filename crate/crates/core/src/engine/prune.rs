use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::fkpp::{front_position, FkppField, FkppSolver, GridSpec, InitialCondition};
use crate::model::{BranchingLaw, SpeedProfile};

/// Kill particles more than `depth` below the current maximum, every
/// `check_interval` time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneRule {
    pub depth: f64,
    pub check_interval: f64,
}

impl PruneRule {
    /// `L = 3 sqrt(t) + 6`, checked once per unit time.
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            depth: 3.0 * horizon.sqrt() + 6.0,
            check_interval: 1.0,
        }
    }

    pub fn new(depth: f64, check_interval: f64, horizon: f64) -> Result<Self> {
        let rule = Self {
            depth,
            check_interval,
        };
        rule.validate(horizon)?;
        Ok(rule)
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.check_interval > 0.0) {
            return Err(config(format!(
                "check interval must be > 0, got {}",
                self.check_interval
            )));
        }
        let floor = 2.0 * horizon.sqrt();
        if !(self.depth >= floor) {
            return Err(config(format!(
                "prune depth {} is below 2 sqrt(t) = {floor}",
                self.depth
            )));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self {
            depth: 2.0 * self.depth,
            ..*self
        }
    }
}

/// `q_s(z)`: probability that the descendants at the horizon of one particle
/// sitting at `0` at time `s` reach above `z`.
///
/// One reversed F-KPP solve from Heaviside data, snapshotted at every check
/// time, gives the whole table.
#[derive(Debug, Clone)]
pub struct SurvivalTable {
    horizon: f64,
    times: Vec<f64>,
    fields: Vec<FkppField>,
}

impl SurvivalTable {
    pub fn build(
        profile: SpeedProfile,
        law: &BranchingLaw,
        grid: GridSpec,
        check_times: &[f64],
    ) -> Result<Self> {
        let horizon = profile.horizon();
        let mut times: Vec<f64> = check_times
            .iter()
            .copied()
            .filter(|s| (0.0..=horizon).contains(s))
            .collect();
        times.sort_by(|a, b| b.total_cmp(a));
        times.dedup();
        let remaining: Vec<f64> = times.iter().map(|s| horizon - s).collect();
        let mut solver = FkppSolver::new(profile, law.clone(), &InitialCondition::Heaviside, grid)?;
        let mut fields = Vec::with_capacity(times.len());
        solver.run_visiting(&remaining, |f| fields.push(f.clone()))?;
        // stored in increasing s
        times.reverse();
        fields.reverse();
        Ok(Self {
            horizon,
            times,
            fields,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn index(&self, s: f64) -> Option<usize> {
        let i = self.times.partition_point(|&x| x < s - 1e-9);
        (i < self.times.len() && (self.times[i] - s).abs() <= 1e-9).then_some(i)
    }

    /// `q_s(z)`, or `None` if `s` is not a tabulated time.
    pub fn survival(&self, s: f64, z: f64) -> Option<f64> {
        self.index(s).map(|i| self.fields[i].value_at(z))
    }

    /// Largest `z` with `q_s(z) >= level`.
    pub fn reach(&self, s: f64, level: f64) -> Option<f64> {
        let field = &self.fields[self.index(s)?];
        front_position(field, level).or_else(|| {
            if field.right_boundary >= level {
                Some(f64::INFINITY)
            } else if field.left_boundary < level {
                Some(f64::NEG_INFINITY)
            } else {
                Some(field.left_edge)
            }
        })
    }

    /// The `z` with `P(max <= z) = p` for the maximum at the horizon of the
    /// descendants of particles at `positions` at time `s`, from
    /// `prod_i (1 - q_s(z - x_i))`. Positions are binned to the table grid.
    pub fn conditional_quantile(&self, s: f64, positions: &[f64], p: f64) -> Option<f64> {
        let field = &self.fields[self.index(s)?];
        let lead = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lead.is_finite() || !(p > 0.0 && p < 1.0) {
            return None;
        }
        let h = field.dx;
        let mut bins: Vec<u64> = Vec::new();
        for &x in positions {
            let b = ((lead - x) / h) as usize;
            if b >= bins.len() {
                bins.resize(b + 1, 0);
            }
            bins[b] += 1;
        }
        let log_cdf = |z: f64| -> f64 {
            bins.iter()
                .enumerate()
                .filter(|(_, n)| **n > 0)
                .map(|(b, &n)| n as f64 * (1.0 - field.value_at(z - (lead - b as f64 * h))).ln())
                .sum()
        };
        let target = p.ln();
        let mut lo = lead + self.reach(s, 1.0 - p)?;
        if !lo.is_finite() {
            return None;
        }
        let mut hi = lo + 1.0;
        while log_cdf(hi) < target {
            hi += 2.0 * (hi - lo);
            if hi - lo > 1e3 {
                return None;
            }
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if log_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Quantile of the maximum at the horizon for a population started from
    /// one particle at the origin: the `x` with `P(max <= x) = p`.
    pub fn max_quantile(&self, p: f64) -> Option<f64> {
        self.reach(0.0, 1.0 - p)
    }
}

const RERUN_SLACK: f64 = 0.25;

/// Keep a particle at `x` at time `s` only if `q_s(target - x) >= tolerance`.
///
/// The running sum of `q_s(target + guard - x)` over pruned particles bounds
/// the expected number of lost particles above `target + guard` at the
/// horizon, and so the total-variation distortion of every event that depends
/// only on them.
#[derive(Debug, Clone)]
pub struct LookaheadRule {
    pub table: Arc<SurvivalTable>,
    /// Lowest level the caller needs resolved at the horizon.
    pub anchor: f64,
    /// Extra room below `anchor`; doubled on extinction.
    pub margin: f64,
    pub tolerance: f64,
    pub check_interval: f64,
    /// Pruning bias is bounded at and above `target + guard`.
    pub guard: f64,
    /// How far below the maximum the caller needs particles resolved.
    pub resolve_depth: f64,
    /// When set to `p`, the target is raised during a run so that it stays
    /// `depth_below + margin` under the `p` quantile of the maximum of the
    /// current leader's descendants. Never raised on reruns.
    pub ratchet: Option<f64>,
    pub depth_below: f64,
}

impl LookaheadRule {
    pub fn target(&self) -> f64 {
        self.anchor - self.margin
    }

    /// Lowest level whose statistics the pruning-mass bound covers.
    pub fn resolved_level(&self) -> f64 {
        self.target() + self.guard
    }

    /// Whether a run that ended with maximum `max` has everything within
    /// `resolve_depth` of it at or above the resolved level, after the
    /// target was raised by `lift`.
    pub fn resolves(&self, max: Option<f64>, lift: f64) -> bool {
        max.is_some_and(|m| m - self.resolve_depth >= self.resolved_level() + lift)
    }

    /// Amount by which the target may sit above its static value at time `s`
    /// given the current positions: `depth_below` under the conditional
    /// `ratchet` quantile of the final maximum.
    pub fn lift_at(&self, s: f64, positions: &[f64]) -> f64 {
        let Some(p) = self.ratchet else { return 0.0 };
        match self.table.conditional_quantile(s, positions, p) {
            Some(z) => (z - self.depth_below - self.anchor).max(0.0),
            None => 0.0,
        }
    }

    /// Rule for a rerun after a run ending with maximum `max`. With a
    /// maximum the static target drops just enough to resolve it and the
    /// ratchet is switched off, so the rerun keeps every lineage the first
    /// run kept; after extinction the margin doubles.
    pub fn widened(&self, max: Option<f64>) -> Self {
        let margin = match max {
            Some(m) => {
                let needed = self.anchor - (m - self.resolve_depth - self.guard) + RERUN_SLACK;
                needed.max(self.margin + RERUN_SLACK)
            }
            None => 2.0 * self.margin.max(0.5),
        };
        Self {
            margin,
            ratchet: None,
            ..self.clone()
        }
    }

    /// Table for `profile` sampled at multiples of the check interval, with
    /// the anchor `depth_below` under the `p_low` quantile of the maximum.
    pub fn for_profile(
        profile: SpeedProfile,
        law: &BranchingLaw,
        grid: GridSpec,
        params: LookaheadParams,
    ) -> Result<Self> {
        let LookaheadParams {
            check_interval,
            p_low,
            depth_below,
            margin,
            tolerance,
            guard,
            ratchet,
        } = params;
        if !(check_interval > 0.0) {
            return Err(config("check interval must be > 0"));
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(config(format!("lookahead tolerance must be in (0,1), got {tolerance}")));
        }
        let t = profile.horizon();
        let mut times: Vec<f64> = (0..)
            .map(|k| k as f64 * check_interval)
            .take_while(|s| *s < t)
            .collect();
        times.push(t);
        let table = SurvivalTable::build(profile, law, grid, &times)?;
        let low = table
            .max_quantile(p_low)
            .filter(|x| x.is_finite())
            .ok_or_else(|| config("could not locate the lower quantile of the maximum"))?;
        Ok(Self {
            table: Arc::new(table),
            anchor: low - depth_below,
            margin,
            tolerance,
            check_interval,
            guard,
            resolve_depth: 0.0,
            ratchet: ratchet.then_some(p_low),
            depth_below,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LookaheadParams {
    pub check_interval: f64,
    pub p_low: f64,
    pub depth_below: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub guard: f64,
    /// Raise the target when the leader runs ahead.
    pub ratchet: bool,
}

impl Default for LookaheadParams {
    fn default() -> Self {
        Self {
            check_interval: 1.0,
            p_low: 0.5,
            depth_below: 5.0,
            margin: 1.0,
            tolerance: 1e-4,
            guard: 3.0,
            ratchet: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub enum Pruning {
    #[default]
    Off,
    BelowMax(PruneRule),
    Lookahead(LookaheadRule),
}

impl Pruning {
    pub fn check_interval(&self) -> Option<f64> {
        match self {
            Pruning::Off => None,
            Pruning::BelowMax(r) => Some(r.check_interval),
            Pruning::Lookahead(r) => Some(r.check_interval),
        }
    }

    /// Whether a finished run must be repeated with [`Pruning::relaxed`]:
    /// pruning emptied the population, or under lookahead the maximum ended
    /// too close to the target.
    pub fn needs_rerun(&self, max: Option<f64>, pruned_count: u64, lift: f64) -> bool {
        if pruned_count == 0 {
            return false;
        }
        match self {
            Pruning::Off => false,
            Pruning::BelowMax(_) => max.is_none(),
            Pruning::Lookahead(r) => !r.resolves(max, lift),
        }
    }

    /// Rule used for the rerun after a pruned population died out.
    pub fn relaxed(&self, max: Option<f64>) -> Self {
        match self {
            Pruning::Off => Pruning::Off,
            Pruning::BelowMax(r) => Pruning::BelowMax(r.doubled()),
            Pruning::Lookahead(r) => Pruning::Lookahead(r.widened(max)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rule_respects_floor() {
        for t in [1.0, 12.0, 30.0, 100.0] {
            PruneRule::for_horizon(t).validate(t).unwrap();
        }
        assert!(PruneRule::new(5.0, 1.0, 12.0).is_err());
        assert!(PruneRule::new(8.0, 0.0, 12.0).is_err());
        assert_eq!(PruneRule::for_horizon(16.0).doubled().depth, 36.0);
    }

    #[test]
    fn survival_table_is_monotone_in_time_and_level() {
        let p = SpeedProfile::homogeneous(6.0).unwrap();
        let times = [0.0, 2.0, 4.0, 6.0];
        let table = SurvivalTable::build(p, &BranchingLaw::binary(), GridSpec::default().with_dx(0.1), &times).unwrap();
        assert_eq!(table.times(), &times);
        // terminal slice is the indicator
        assert_eq!(table.survival(6.0, -0.5), Some(1.0));
        assert_eq!(table.survival(6.0, 0.5), Some(0.0));
        for z in [0.0, 2.0, 5.0] {
            let mut prev = 0.0;
            for s in [6.0, 4.0, 2.0, 0.0] {
                let q = table.survival(s, z).unwrap();
                assert!(q + 1e-12 >= prev, "q_{s}({z}) = {q} < {prev}");
                prev = q;
            }
        }
        assert!(table.survival(3.0, 0.0).is_none());
        let med = table.max_quantile(0.5).unwrap();
        assert!((table.survival(0.0, med).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn lookahead_anchor_sits_below_the_low_quantile() {
        let p = SpeedProfile::homogeneous(8.0).unwrap();
        let rule = LookaheadRule::for_profile(p, &BranchingLaw::binary(), GridSpec::default().with_dx(0.1), LookaheadParams::default()).unwrap();
        let q = rule.table.survival(0.0, rule.anchor + 5.0).unwrap();
        assert!((q - 0.5).abs() < 1e-6);
        assert_eq!(rule.target(), rule.anchor - 1.0);
        assert_eq!(rule.widened(None).margin, 2.0);
        let m = rule.target() + rule.guard - 1.0;
        let wide = rule.widened(Some(m));
        assert!(wide.resolves(Some(m), 0.0));
        assert!(wide.margin > rule.margin);
        assert_eq!(rule.table.times().len(), 9);
    }
}

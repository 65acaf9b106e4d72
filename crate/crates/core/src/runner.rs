//! Replicate driver: simulation, per-checkpoint martingales and record assembly.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::engine::{classify_path, simulate, Checkpoint, SimSpec};
use crate::error::{config, Error, Result};
use crate::model::{Shape, SpeedProfile};
use crate::numerics::{mean, quantile};
use crate::record::{CheckpointValue, ExtremalPoints, McKeanValue, ReplicateRecord, RECORD_VERSION};
use crate::rng::replicate_key;
use crate::stats::{derivative_martingale, mckean_martingale};

pub struct Runner {
    config: ExperimentConfig,
    profile: SpeedProfile,
    spec: SimSpec,
}

type Observed = Option<(CheckpointValue, Vec<McKeanValue>)>;

impl Runner {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let spec = config.sim_spec()?;
        Ok(Self {
            profile: spec.profile,
            spec,
            config,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn spec(&self) -> &SimSpec {
        &self.spec
    }

    /// Martingales on the first-phase path rescaled by `sigma_1`; undefined
    /// once the speed has changed.
    fn observe(&self, cp: &Checkpoint<'_>) -> Observed {
        let a = &self.config.analysis;
        if !a.checkpoints.iter().any(|c| (c - cp.time).abs() < 1e-9) {
            return None;
        }
        let scale = match self.profile.shape() {
            Shape::Homogeneous => Some(1.0),
            Shape::TwoSpeed { .. } if cp.time <= self.profile.change_time() + 1e-9 => Some(self.profile.sigma1()),
            Shape::TwoSpeed { .. } => None,
        };
        let scaled: Option<Vec<f64>> = scale.map(|s| cp.positions.iter().map(|x| x / s).collect());
        let z = scaled
            .as_ref()
            .and_then(|x| derivative_martingale(x, cp.time).ok());
        let ys = a
            .mckean_sigmas
            .iter()
            .map(|&sigma| McKeanValue {
                time: cp.time,
                sigma,
                value: scaled
                    .as_ref()
                    .and_then(|x| mckean_martingale(x, cp.time, sigma).ok()),
            })
            .collect();
        Some((
            CheckpointValue {
                time: cp.time,
                value: z,
            },
            ys,
        ))
    }

    /// Replicate `index` under `master_seed`; depends on nothing else.
    pub fn replicate(&self, master_seed: u64, index: u64) -> Result<ReplicateRecord> {
        let seed = replicate_key(master_seed, index);
        let (pop, observed) = simulate(&self.spec, seed, |cp| self.observe(cp)).map_err(|e| match e {
            Error::Resource { cap, .. } => Error::Resource {
                cap,
                replicate: Some(index),
            },
            other => other,
        })?;
        let mut z_at_checkpoints = Vec::new();
        let mut y_at_checkpoints = Vec::new();
        for (z, ys) in observed.into_iter().flatten() {
            z_at_checkpoints.push(z);
            y_at_checkpoints.extend(ys);
        }

        let a = &self.config.analysis;
        let t = self.profile.horizon();
        let half = self.profile.change_time();
        let max = pop.max();
        let mut ancestor_offsets = Vec::new();
        let mut top_gaps = Vec::new();
        let mut flags = Vec::new();
        let mut extremal = ExtremalPoints {
            retention: a.retention,
            label_times: self.config.label_times(),
            ..ExtremalPoints::default()
        };
        extremal.labels = vec![Vec::new(); extremal.label_times.len()];
        if let Some(m) = max {
            if let Some(level) = pop.resolved_level {
                extremal.retention = extremal.retention.min(m - level);
            }
            let half_idx = self
                .spec
                .checkpoint_index(half)
                .ok_or_else(|| Error::Precondition("no snapshot at the speed change".into()))?;
            let label_idx: Vec<usize> = extremal
                .label_times
                .iter()
                .map(|&s| {
                    self.spec
                        .checkpoint_index(s)
                        .ok_or_else(|| Error::Precondition(format!("no snapshot at {s}")))
                })
                .collect::<Result<_>>()?;
            let line = SQRT_2 * self.profile.sigma1() * half;
            for i in pop.ranked() {
                let x = pop.positions()[i];
                let gap = m - x;
                if gap > extremal.retention {
                    break;
                }
                extremal.positions.push(x);
                for (j, &c) in label_idx.iter().enumerate() {
                    extremal.labels[j].push(pop.ancestor(i, c));
                }
                if gap <= a.top_depth {
                    ancestor_offsets.push(line - pop.snapshot(i, half_idx));
                    top_gaps.push(gap);
                    if a.classify {
                        flags.push(classify_path(&pop.particle(i), &self.profile, &a.classify_params)?);
                    }
                }
            }
        }
        Ok(ReplicateRecord {
            version: RECORD_VERSION,
            replicate: index,
            seed,
            profile: self.config.profile,
            t,
            max,
            recentering: self.profile.recentering(),
            z_at_checkpoints,
            y_at_checkpoints,
            ancestor_offsets,
            top_gaps,
            top_depth: a.top_depth,
            flags,
            pruned_count: pop.pruned_count,
            pruned_mass: pop.pruned_mass,
            reruns: pop.reruns,
            population: pop.len() as u64,
            extremal,
        })
    }

    /// Replicates `0..count` in parallel, returned in index order. The output
    /// does not depend on `threads`.
    pub fn run(&self, master_seed: u64, count: u64, threads: Option<usize>) -> Result<Vec<ReplicateRecord>> {
        self.run_range(master_seed, 0..count, threads)
    }

    /// Replicates with indices in `range`, in index order.
    pub fn run_range(
        &self,
        master_seed: u64,
        range: std::ops::Range<u64>,
        threads: Option<usize>,
    ) -> Result<Vec<ReplicateRecord>> {
        let work = || {
            range
                .clone()
                .into_par_iter()
                .map(|i| self.replicate(master_seed, i))
                .collect::<Result<Vec<_>>>()
        };
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        }
    }
}

/// Aggregate view of a batch of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replicates: usize,
    pub extinct: usize,
    pub mean_population: f64,
    pub total_pruned: u64,
    pub max_pruned_mass: f64,
    pub reruns: u64,
    pub recentering: Option<f64>,
    /// Quantiles 0.05, 0.25, 0.5, 0.75, 0.95 of the recentered maximum.
    pub recentered_max_quantiles: Vec<(f64, f64)>,
    pub mean_recentered_max: Option<f64>,
}

pub fn summarize(records: &[ReplicateRecord]) -> RunSummary {
    let maxima: Vec<f64> = records.iter().filter_map(|r| r.recentered_max()).collect();
    let pops: Vec<f64> = records.iter().map(|r| r.population as f64).collect();
    let probs = [0.05, 0.25, 0.5, 0.75, 0.95];
    RunSummary {
        replicates: records.len(),
        extinct: records.len() - maxima.len(),
        mean_population: if pops.is_empty() { 0.0 } else { mean(&pops) },
        total_pruned: records.iter().map(|r| r.pruned_count).sum(),
        max_pruned_mass: records.iter().map(|r| r.pruned_mass).fold(0.0, f64::max),
        reruns: records.iter().map(|r| r.reruns as u64).sum(),
        recentering: records.first().map(|r| r.recentering),
        recentered_max_quantiles: if maxima.is_empty() {
            Vec::new()
        } else {
            probs.iter().map(|&p| (p, quantile(&maxima, p))).collect()
        },
        mean_recentered_max: (!maxima.is_empty()).then(|| mean(&maxima)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PruningKind;
    use crate::model::Sign;

    fn cfg(profile: SpeedProfile) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(profile);
        c.analysis.checkpoints = vec![2.0, 4.0, 6.0];
        c.analysis.label_lags = vec![1.0];
        c.analysis.classify = true;
        c
    }

    #[test]
    fn records_are_consistent() {
        let runner = Runner::new(cfg(SpeedProfile::two_speed(Sign::Plus, 0.3, 6.0).unwrap())).unwrap();
        let recs = runner.run(3, 8, Some(2)).unwrap();
        assert_eq!(recs.len(), 8);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.replicate, i as u64);
            let m = r.max.unwrap();
            assert_eq!(r.extremal.positions[0], m);
            assert!(r.extremal.positions.iter().all(|x| m - x <= 10.0));
            assert_eq!(r.extremal.labels[0].len(), r.extremal.positions.len());
            assert_eq!(r.ancestor_offsets.len(), r.top_gaps.len());
            assert_eq!(r.flags.len(), r.top_gaps.len());
            assert_eq!(r.top_gaps[0], 0.0);
            // defined up to the speed change only
            assert!(r.z_at(2.0).is_some());
            assert!(r.z_at(6.0).is_none());
            assert_eq!(r.y_at_checkpoints.len(), 3);
        }
    }

    #[test]
    fn output_is_independent_of_threads() {
        let runner = Runner::new(cfg(SpeedProfile::homogeneous(6.0).unwrap())).unwrap();
        let a = runner.run(11, 6, Some(1)).unwrap();
        let b = runner.run(11, 6, Some(3)).unwrap();
        assert_eq!(a, b);
        assert!(a[0].z_at(6.0).is_some());
        assert_eq!(runner.run_range(11, 4..6, None).unwrap(), a[4..]);
    }

    #[test]
    fn resource_error_names_the_replicate() {
        let mut c = cfg(SpeedProfile::homogeneous(8.0).unwrap());
        c.engine.pruning = PruningKind::Off;
        c.engine.cap = 50;
        let err = Runner::new(c).unwrap().run(1, 4, Some(1)).unwrap_err();
        assert!(matches!(err, Error::Resource { cap: 50, replicate: Some(_) }));
    }

    #[test]
    fn summary_counts() {
        let runner = Runner::new(cfg(SpeedProfile::homogeneous(6.0).unwrap())).unwrap();
        let recs = runner.run(2, 20, None).unwrap();
        let s = summarize(&recs);
        assert_eq!(s.replicates, 20);
        assert_eq!(s.extinct, 0);
        assert_eq!(s.recentered_max_quantiles.len(), 5);
        assert!(s.mean_population > 1.0);
    }
}

use serde::{Deserialize, Serialize};

use super::sim::Population;
use crate::error::{Error, Result};
use crate::model::SpeedProfile;
use crate::numerics::mean_and_se;
use crate::rng::LineageRng;

#[derive(Debug, Clone, Copy)]
struct Node {
    parent: u32,
    depth: u32,
    time: f64,
}

/// Branching tree: every branching event ends the parent's node and opens one
/// node per offspring, the continuing parent included.
#[derive(Debug, Clone)]
pub struct Genealogy {
    nodes: Vec<Node>,
}

impl Default for Genealogy {
    fn default() -> Self {
        Self::new()
    }
}

impl Genealogy {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node {
                parent: u32::MAX,
                depth: 0,
                time: 0.0,
            }],
        }
    }

    pub(crate) fn split(&mut self, parent: u32, time: f64) -> u32 {
        let depth = self.nodes[parent as usize].depth + 1;
        self.nodes.push(Node {
            parent,
            depth,
            time,
        });
        (self.nodes.len() - 1) as u32
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Time of the most recent common ancestor of two leaves, or `None` for
    /// the same leaf.
    pub fn split_time(&self, a: u32, b: u32) -> Option<f64> {
        if a == b {
            return None;
        }
        let (mut a, mut b) = (a, b);
        let node = |i: u32| self.nodes[i as usize];
        while node(a).depth > node(b).depth {
            a = node(a).parent;
        }
        while node(b).depth > node(a).depth {
            b = node(b).parent;
        }
        if a == b {
            // one leaf descends from the other's node; cannot happen for leaves
            return Some(node(a).time);
        }
        while node(a).parent != node(b).parent {
            a = node(a).parent;
            b = node(b).parent;
        }
        Some(node(a).time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    /// Branching time of the most recent common ancestor.
    pub split_time: f64,
    pub first: f64,
    pub second: f64,
}

/// `count` uniformly chosen pairs of distinct particles.
pub fn sample_pairs(
    population: &Population,
    rng: &mut LineageRng,
    count: usize,
) -> Result<Vec<PairSample>> {
    let tree = population.genealogy().ok_or_else(|| {
        Error::Precondition("pair sampling needs a simulation with genealogy".into())
    })?;
    let n = population.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let pick = |rng: &mut LineageRng, m: usize| ((rng.uniform() * m as f64) as usize).min(m - 1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let i = pick(rng, n);
        let mut j = pick(rng, n - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (population.node(i).unwrap(), population.node(j).unwrap());
        let d = tree.split_time(a, b).unwrap_or(population.sim_time);
        out.push(PairSample {
            split_time: d,
            first: population.positions()[i],
            second: population.positions()[j],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyBucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean of `x * y` over the bucket.
    pub empirical: f64,
    pub standard_error: f64,
    /// Mean of the model covariance over the bucket's split times.
    pub predicted: f64,
}

impl ConsistencyBucket {
    pub fn z_score(&self) -> f64 {
        if self.standard_error > 0.0 {
            (self.empirical - self.predicted) / self.standard_error
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub buckets: Vec<ConsistencyBucket>,
    pub max_abs_deviation: f64,
    pub max_abs_z: f64,
}

/// Compare the empirical covariance of particle pairs with
/// `Sigma^2(split time)`, bucketed into `bins` equal intervals of `[0, t]`.
/// Empty buckets are skipped.
pub fn gaussian_consistency(
    profile: &SpeedProfile,
    pairs: &[PairSample],
    bins: usize,
) -> Result<ConsistencyReport> {
    let t = profile.horizon();
    let bins = bins.max(1);
    let width = t / bins as f64;
    let mut grouped: Vec<Vec<&PairSample>> = vec![Vec::new(); bins];
    for p in pairs {
        let b = ((p.split_time / width) as usize).min(bins - 1);
        grouped[b].push(p);
    }
    let mut buckets = Vec::new();
    for (b, group) in grouped.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let products: Vec<f64> = group.iter().map(|p| p.first * p.second).collect();
        let (empirical, se) = mean_and_se(&products);
        let mut predicted = 0.0;
        for p in group {
            predicted += profile.covariance(t, t, p.split_time)?;
        }
        predicted /= group.len() as f64;
        buckets.push(ConsistencyBucket {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            count: group.len(),
            empirical,
            standard_error: se,
            predicted,
        });
    }
    let max_abs_deviation = buckets
        .iter()
        .map(|b| (b.empirical - b.predicted).abs())
        .fold(0.0, f64::max);
    let max_abs_z = buckets
        .iter()
        .map(|b| b.z_score().abs())
        .fold(0.0, f64::max);
    Ok(ConsistencyReport {
        buckets,
        max_abs_deviation,
        max_abs_z,
    })
}

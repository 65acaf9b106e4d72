use rand_distr::{Distribution, Exp1, StandardNormal};

use super::genealogy::Genealogy;
use super::prune::Pruning;
use crate::error::{Error, Result};
use crate::model::{BranchingLaw, SpeedProfile};
use crate::rng::LineageRng;

pub const DEFAULT_POPULATION_CAP: usize = 50_000_000;

const TIME_EPS: f64 = 1e-9;

/// Everything that determines a replicate apart from its seed.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub profile: SpeedProfile,
    pub law: BranchingLaw,
    pub pruning: Pruning,
    /// Strictly increasing times in `[0, horizon]` at which ancestral
    /// positions are recorded.
    pub checkpoints: Vec<f64>,
    pub cap: usize,
    /// Keep the full branching tree (small horizons only).
    pub genealogy: bool,
    /// Reruns with a relaxed prune rule before giving up on a population
    /// that pruning drove extinct.
    pub max_reruns: u32,
}

impl SimSpec {
    pub fn new(profile: SpeedProfile, law: BranchingLaw) -> Self {
        Self {
            profile,
            law,
            pruning: Pruning::Off,
            checkpoints: Vec::new(),
            cap: DEFAULT_POPULATION_CAP,
            genealogy: false,
            max_reruns: 6,
        }
    }

    pub fn with_pruning(mut self, pruning: Pruning) -> Self {
        self.pruning = pruning;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_genealogy(mut self, on: bool) -> Self {
        self.genealogy = on;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.profile.horizon()
    }

    pub fn checkpoint_index(&self, time: f64) -> Option<usize> {
        self.checkpoints
            .iter()
            .position(|c| (c - time).abs() <= TIME_EPS)
    }

    fn validate(&self) -> Result<()> {
        let t = self.horizon();
        if !(t >= 0.0) {
            return Err(Error::Precondition(format!("horizon must be >= 0, got {t}")));
        }
        for (i, &c) in self.checkpoints.iter().enumerate() {
            if !(0.0..=t).contains(&c) {
                return Err(Error::Precondition(format!(
                    "checkpoint {c} outside [0, {t}]"
                )));
            }
            if i > 0 && c <= self.checkpoints[i - 1] {
                return Err(Error::Precondition(
                    "checkpoints must be strictly increasing".into(),
                ));
            }
        }
        if let Pruning::BelowMax(rule) = &self.pruning {
            rule.validate(t)?;
        }
        if let Pruning::Lookahead(rule) = &self.pruning {
            if (rule.table.horizon() - t).abs() > TIME_EPS {
                return Err(Error::Precondition(format!(
                    "survival table built for horizon {}, simulating {t}",
                    rule.table.horizon()
                )));
            }
        }
        Ok(())
    }
}

/// Positions handed to the observer at a checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct Checkpoint<'a> {
    pub index: usize,
    pub time: f64,
    pub positions: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: f64,
    /// `(checkpoint time, ancestral position)` for every checkpoint passed.
    pub ancestor_snapshots: Vec<(f64, f64)>,
    pub alive: bool,
}

impl Particle {
    pub fn at(position: f64) -> Self {
        Self {
            position,
            ancestor_snapshots: Vec::new(),
            alive: true,
        }
    }

    pub fn snapshot_at(&self, time: f64) -> Option<f64> {
        self.ancestor_snapshots
            .iter()
            .find(|(s, _)| (s - time).abs() <= TIME_EPS)
            .map(|(_, x)| *x)
    }
}

/// Alive particles at the end of a replicate.
#[derive(Debug, Clone)]
pub struct Population {
    positions: Vec<f64>,
    snapshots: Vec<f64>,
    ancestors: Vec<u32>,
    nodes: Vec<u32>,
    checkpoints: Vec<f64>,
    genealogy: Option<Genealogy>,
    pub sim_time: f64,
    pub pruned_count: u64,
    /// Sum over pruned particles of their lookahead survival probability to
    /// the resolved level.
    pub pruned_mass: f64,
    pub rng_seed: u64,
    /// Reruns with a relaxed rule that were needed.
    pub reruns: u32,
    /// Level above which a lookahead rule kept the population faithful.
    pub resolved_level: Option<f64>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    /// Position at checkpoint `c` of the ancestor of particle `i`.
    pub fn snapshot(&self, i: usize, c: usize) -> f64 {
        self.snapshots[i * self.checkpoints.len() + c]
    }

    /// Label of the ancestor of particle `i` alive at checkpoint `c`; two
    /// particles share a label iff they share that ancestor.
    pub fn ancestor(&self, i: usize, c: usize) -> u32 {
        self.ancestors[i * self.checkpoints.len() + c]
    }

    pub fn particle(&self, i: usize) -> Particle {
        Particle {
            position: self.positions[i],
            ancestor_snapshots: self
                .checkpoints
                .iter()
                .enumerate()
                .map(|(c, &s)| (s, self.snapshot(i, c)))
                .collect(),
            alive: true,
        }
    }

    pub fn genealogy(&self) -> Option<&Genealogy> {
        self.genealogy.as_ref()
    }

    /// Genealogy node of particle `i`, when the tree was kept.
    pub fn node(&self, i: usize) -> Option<u32> {
        self.nodes.get(i).copied()
    }

    pub fn max(&self) -> Option<f64> {
        sample_max(self)
    }

    /// Indices sorted by decreasing position.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.positions[b].total_cmp(&self.positions[a]));
        idx
    }
}

pub fn sample_max(population: &Population) -> Option<f64> {
    population
        .positions
        .iter()
        .copied()
        .max_by(f64::total_cmp)
}

/// Simulate one replicate. `observe` is called once per checkpoint with the
/// alive positions; its outputs come back in checkpoint order.
///
/// A population that pruning drives extinct, or whose maximum a lookahead
/// rule failed to resolve, is rerun from the same seed with a relaxed rule,
/// so the surviving lineages are unchanged.
pub fn simulate<T>(
    spec: &SimSpec,
    seed: u64,
    mut observe: impl FnMut(&Checkpoint<'_>) -> T,
) -> Result<(Population, Vec<T>)> {
    spec.validate()?;
    let mut pruning = spec.pruning.clone();
    let mut reruns = 0;
    loop {
        let (mut pop, obs) = run_once(spec, &pruning, seed, &mut observe)?;
        pop.reruns = reruns;
        let lift = match (&pruning, pop.resolved_level) {
            (Pruning::Lookahead(r), Some(level)) => level - r.resolved_level(),
            _ => 0.0,
        };
        if !pruning.needs_rerun(pop.max(), pop.pruned_count, lift) || reruns >= spec.max_reruns {
            return Ok((pop, obs));
        }
        pruning = pruning.relaxed(pop.max());
        reruns += 1;
    }
}

struct Slice {
    end: f64,
    check: bool,
    checkpoint: Option<usize>,
}

fn slice_plan(spec: &SimSpec, check_interval: Option<f64>) -> Vec<Slice> {
    let t = spec.horizon();
    let mut ends: Vec<(f64, bool)> = vec![(t, check_interval.is_some())];
    if let Some(ci) = check_interval {
        ends.extend(
            (1..)
                .map(|k| k as f64 * ci)
                .take_while(|s| *s < t - TIME_EPS)
                .map(|s| (s, true)),
        );
    }
    ends.extend(spec.checkpoints.iter().filter(|c| **c > 0.0).map(|&c| (c, false)));
    let change = spec.profile.change_time();
    if change > 0.0 && change < t {
        ends.push((change, false));
    }
    ends.retain(|e| e.0 > TIME_EPS);
    ends.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut plan: Vec<Slice> = Vec::with_capacity(ends.len());
    for (end, check) in ends {
        match plan.last_mut() {
            Some(last) if (end - last.end).abs() <= TIME_EPS => last.check |= check,
            _ => plan.push(Slice {
                end,
                check,
                checkpoint: None,
            }),
        }
    }
    for slice in &mut plan {
        slice.checkpoint = spec.checkpoint_index(slice.end);
    }
    plan
}

/// Structure-of-arrays particle store. Snapshot and ancestor blocks have
/// stride `k`, the number of checkpoints.
struct Work {
    pos: Vec<f64>,
    born: Vec<f64>,
    next: Vec<f64>,
    rng: Vec<LineageRng>,
    snaps: Vec<f64>,
    anc: Vec<u32>,
    nodes: Vec<u32>,
    tree: Option<Genealogy>,
    k: usize,
}

impl Work {
    fn new(seed: u64, k: usize, genealogy: bool) -> Self {
        let mut rng = LineageRng::new(seed);
        let first: f64 = Exp1.sample(&mut rng);
        let tree = genealogy.then(Genealogy::new);
        Self {
            pos: vec![0.0],
            born: vec![0.0],
            next: vec![first],
            rng: vec![rng],
            snaps: vec![0.0; k],
            anc: vec![0; k],
            nodes: if genealogy { vec![0] } else { Vec::new() },
            tree,
            k,
        }
    }

    fn len(&self) -> usize {
        self.pos.len()
    }

    /// Carry every particle (and every particle born on the way) to `end`.
    fn advance(&mut self, end: f64, sd: f64, law: &BranchingLaw, cap: usize) -> Result<()> {
        let binary = law.is_binary();
        let k = self.k;
        let mut i = 0;
        while i < self.pos.len() {
            let mut x = self.pos[i];
            let mut s = self.born[i];
            let mut next = self.next[i];
            let mut rng = self.rng[i];
            while next < end {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += sd * (next - s).sqrt() * z;
                s = next;
                let kids = if binary {
                    2
                } else {
                    law.offspring_count(rng.uniform())
                };
                if let Some(tree) = self.tree.as_mut() {
                    let parent = self.nodes[i];
                    self.nodes[i] = tree.split(parent, s);
                    for _ in 1..kids {
                        let node = tree.split(parent, s);
                        self.nodes.push(node);
                    }
                }
                for _ in 1..kids {
                    if self.pos.len() >= cap {
                        return Err(Error::Resource {
                            cap,
                            replicate: None,
                        });
                    }
                    let mut child = rng.spawn();
                    let wait: f64 = Exp1.sample(&mut child);
                    self.pos.push(x);
                    self.born.push(s);
                    self.next.push(s + wait);
                    self.rng.push(child);
                    self.snaps.extend_from_within(i * k..(i + 1) * k);
                    self.anc.extend_from_within(i * k..(i + 1) * k);
                }
                let wait: f64 = Exp1.sample(&mut rng);
                next = s + wait;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            x += sd * (end - s).sqrt() * z;
            self.pos[i] = x;
            self.born[i] = end;
            self.next[i] = next;
            self.rng[i] = rng;
            i += 1;
        }
        Ok(())
    }

    fn retain(&mut self, keep: &[bool]) -> usize {
        let k = self.k;
        let n = self.len();
        let mut w = 0;
        for r in 0..n {
            if !keep[r] {
                continue;
            }
            if w != r {
                self.pos[w] = self.pos[r];
                self.born[w] = self.born[r];
                self.next[w] = self.next[r];
                self.rng[w] = self.rng[r];
                self.snaps.copy_within(r * k..(r + 1) * k, w * k);
                self.anc.copy_within(r * k..(r + 1) * k, w * k);
                if !self.nodes.is_empty() {
                    self.nodes[w] = self.nodes[r];
                }
            }
            w += 1;
        }
        self.pos.truncate(w);
        self.born.truncate(w);
        self.next.truncate(w);
        self.rng.truncate(w);
        self.snaps.truncate(w * k);
        self.anc.truncate(w * k);
        if !self.nodes.is_empty() {
            self.nodes.truncate(w);
        }
        n - w
    }

    fn snapshot(&mut self, c: usize) {
        let k = self.k;
        for i in 0..self.len() {
            self.snaps[i * k + c] = self.pos[i];
            self.anc[i * k + c] = i as u32;
        }
    }

    /// Returns `(removed, pruned survival mass)`.
    fn prune(&mut self, pruning: &Pruning, s: f64, horizon: f64, lift: f64) -> (usize, f64) {
        let keep: Vec<bool> = match pruning {
            Pruning::Off => return (0, 0.0),
            Pruning::BelowMax(rule) => {
                let max = self.pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let floor = max - rule.depth;
                self.pos.iter().map(|&x| x >= floor).collect()
            }
            Pruning::Lookahead(rule) => {
                if s >= horizon - TIME_EPS {
                    return (0, 0.0);
                }
                let Some(reach) = rule.table.reach(s, rule.tolerance) else {
                    return (0, 0.0);
                };
                let floor = rule.target() + lift - reach;
                self.pos.iter().map(|&x| x >= floor).collect()
            }
        };
        let mut mass = 0.0;
        if let Pruning::Lookahead(rule) = pruning {
            let level = rule.resolved_level() + lift;
            for (x, _) in self.pos.iter().zip(&keep).filter(|(_, k)| !**k) {
                mass += rule.table.survival(s, level - x).unwrap_or(0.0);
            }
        }
        (self.retain(&keep), mass)
    }
}

fn run_once<T>(
    spec: &SimSpec,
    pruning: &Pruning,
    seed: u64,
    observe: &mut impl FnMut(&Checkpoint<'_>) -> T,
) -> Result<(Population, Vec<T>)> {
    let t = spec.horizon();
    let k = spec.checkpoints.len();
    let mut work = Work::new(seed, k, spec.genealogy);
    let mut obs = Vec::with_capacity(k);
    let mut pruned_count = 0u64;
    let mut pruned_mass = 0.0;
    let mut lift = 0.0f64;

    if let Some(c) = spec.checkpoint_index(0.0) {
        work.snapshot(c);
        obs.push(observe(&Checkpoint {
            index: c,
            time: 0.0,
            positions: &work.pos,
        }));
    }
    let mut start = 0.0;
    for slice in slice_plan(spec, pruning.check_interval()) {
        if work.len() == 0 {
            break;
        }
        let sd = spec
            .profile
            .sigma_squared_unchecked(0.5 * (start + slice.end))
            .sqrt();
        work.advance(slice.end, sd, &spec.law, spec.cap)?;
        if let Some(c) = slice.checkpoint {
            work.snapshot(c);
            obs.push(observe(&Checkpoint {
                index: c,
                time: slice.end,
                positions: &work.pos,
            }));
        }
        if slice.check && work.len() > 0 {
            if let Pruning::Lookahead(rule) = pruning {
                lift = lift.max(rule.lift_at(slice.end, &work.pos));
            }
            let (removed, mass) = work.prune(pruning, slice.end, t, lift);
            pruned_count += removed as u64;
            pruned_mass += mass;
        }
        start = slice.end;
    }

    Ok((
        Population {
            positions: work.pos,
            snapshots: work.snaps,
            ancestors: work.anc,
            nodes: work.nodes,
            checkpoints: spec.checkpoints.clone(),
            genealogy: work.tree,
            sim_time: start,
            pruned_count,
            pruned_mass,
            rng_seed: seed,
            reruns: 0,
            resolved_level: match pruning {
                Pruning::Lookahead(rule) => Some(rule.resolved_level() + lift),
                _ => None,
            },
        },
        obs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PruneRule;
    use crate::model::Sign;
    use crate::numerics::mean_and_se;
    use crate::rng::replicate_key;

    fn hom(t: f64) -> SimSpec {
        SimSpec::new(SpeedProfile::homogeneous(t).unwrap(), BranchingLaw::binary())
    }

    #[test]
    fn zero_horizon_is_single_particle() {
        let (pop, obs) = simulate(&hom(0.0).with_checkpoints(vec![0.0]), 7, |c| c.positions.len()).unwrap();
        assert_eq!(pop.positions(), &[0.0]);
        assert_eq!(obs, vec![1]);
        assert_eq!(sample_max(&pop), Some(0.0));
    }

    #[test]
    fn mean_population_is_exponential() {
        let spec = hom(3.0);
        let sizes: Vec<f64> = (0..10_000)
            .map(|i| simulate(&spec, replicate_key(11, i), |_| ()).unwrap().0.len() as f64)
            .collect();
        let (m, se) = mean_and_se(&sizes);
        let expected = 3f64.exp();
        assert!((m - expected).abs() < 3.0 * se, "{m} +- {se} vs {expected}");
    }

    #[test]
    fn same_seed_same_population() {
        let spec = SimSpec::new(SpeedProfile::two_speed(Sign::Plus, 0.3, 6.0).unwrap(), BranchingLaw::binary())
            .with_checkpoints(vec![1.0, 3.0, 4.5]);
        let (a, oa) = simulate(&spec, 99, |c| c.positions.iter().sum::<f64>()).unwrap();
        let (b, ob) = simulate(&spec, 99, |c| c.positions.iter().sum::<f64>()).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_eq!(oa, ob);
        let (c, _) = simulate(&spec, 100, |_| ()).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn snapshots_cover_every_checkpoint() {
        let spec = hom(4.0).with_checkpoints(vec![0.0, 1.0, 2.0, 4.0]);
        let (pop, _) = simulate(&spec, 3, |_| ()).unwrap();
        for i in 0..pop.len() {
            let p = pop.particle(i);
            assert_eq!(p.ancestor_snapshots.len(), 4);
            assert_eq!(p.snapshot_at(0.0), Some(0.0));
            assert_eq!(p.snapshot_at(4.0), Some(p.position));
            assert_eq!(pop.ancestor(i, 0), 0);
        }
        // particles with the same ancestor at time 2 share its snapshot
        for i in 0..pop.len() {
            for j in 0..pop.len() {
                if pop.ancestor(i, 2) == pop.ancestor(j, 2) {
                    assert_eq!(pop.snapshot(i, 2), pop.snapshot(j, 2));
                    assert_eq!(pop.ancestor(i, 1), pop.ancestor(j, 1));
                }
            }
        }
    }

    #[test]
    fn pruned_population_stays_near_the_max() {
        let rule = PruneRule::new(2.0 * 6f64.sqrt(), 1.0, 6.0).unwrap();
        let spec = hom(6.0).with_pruning(Pruning::BelowMax(rule));
        let mut total_pruned = 0;
        for i in 0..20 {
            let (pop, _) = simulate(&spec, replicate_key(5, i), |_| ()).unwrap();
            let max = pop.max().unwrap();
            assert!(pop.positions().iter().all(|&x| x >= max - rule.depth));
            total_pruned += pop.pruned_count;
        }
        assert!(total_pruned > 0);
    }

    #[test]
    fn pruning_keeps_surviving_lineages() {
        // the deep rule removes nothing the shallow rule keeps, so the
        // shallow population is a subset of the deep one
        let shallow = PruneRule::new(6.0, 1.0, 8.0).unwrap();
        for i in 0..10 {
            let seed = replicate_key(8, i);
            let (a, _) = simulate(&hom(8.0).with_pruning(Pruning::BelowMax(shallow)), seed, |_| ()).unwrap();
            let (b, _) = simulate(&hom(8.0).with_pruning(Pruning::BelowMax(shallow.doubled())), seed, |_| ()).unwrap();
            let mut deep: Vec<u64> = b.positions().iter().map(|x| x.to_bits()).collect();
            deep.sort_unstable();
            for x in a.positions() {
                assert!(deep.binary_search(&x.to_bits()).is_ok());
            }
            assert_eq!(a.max(), b.max());
        }
    }

    #[test]
    fn lookahead_resolves_the_top_of_the_population() {
        use crate::engine::{LookaheadParams, LookaheadRule};
        use crate::fkpp::GridSpec;
        let p = SpeedProfile::two_speed(Sign::Plus, 0.3, 9.0).unwrap();
        let mut rule = LookaheadRule::for_profile(p, &BranchingLaw::binary(), GridSpec::default().with_dx(0.1), LookaheadParams::default()).unwrap();
        rule.resolve_depth = 1.0;
        // same slice plan, effectively no pruning
        let wide = PruneRule::new(100.0, 1.0, 9.0).unwrap();
        let spec = SimSpec::new(p, BranchingLaw::binary());
        let top = |pop: &Population| -> Vec<u64> {
            let m = pop.max().unwrap();
            let mut v: Vec<u64> = pop.positions().iter().filter(|x| m - **x <= 1.0).map(|x| x.to_bits()).collect();
            v.sort_unstable();
            v
        };
        let mut pruned = 0;
        for i in 0..20 {
            let seed = replicate_key(21, i);
            let (a, _) = simulate(&spec.clone().with_pruning(Pruning::Lookahead(rule.clone())), seed, |_| ()).unwrap();
            let (b, _) = simulate(&spec.clone().with_pruning(Pruning::BelowMax(wide)), seed, |_| ()).unwrap();
            assert_eq!(top(&a), top(&b));
            assert!(a.resolved_level.unwrap() <= a.max().unwrap() - 1.0);
            assert!(a.len() <= b.len());
            pruned += a.pruned_count;
        }
        assert!(pruned > 0);
    }

    #[test]
    fn cap_is_a_resource_error() {
        let spec = hom(10.0).with_cap(100);
        match simulate(&spec, 1, |_| ()) {
            Err(Error::Resource { cap: 100, .. }) => {}
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_checkpoints() {
        assert!(simulate(&hom(2.0).with_checkpoints(vec![3.0]), 1, |_| ()).is_err());
        assert!(simulate(&hom(2.0).with_checkpoints(vec![1.0, 1.0]), 1, |_| ()).is_err());
    }

    #[test]
    fn non_binary_law_keeps_mean_growth() {
        let law = BranchingLaw::new(vec![0.5, 0.0, 0.5]).unwrap();
        let spec = SimSpec::new(SpeedProfile::homogeneous(2.0).unwrap(), law);
        let sizes: Vec<f64> = (0..10_000)
            .map(|i| simulate(&spec, replicate_key(2, i), |_| ()).unwrap().0.len() as f64)
            .collect();
        let (m, se) = mean_and_se(&sizes);
        assert!((m - 2f64.exp()).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn slice_plan_splits_at_speed_change() {
        let spec = SimSpec::new(SpeedProfile::two_speed(Sign::Minus, 0.3, 5.0).unwrap(), BranchingLaw::binary())
            .with_checkpoints(vec![2.0]);
        let plan = slice_plan(&spec, Some(1.0));
        let ends: Vec<f64> = plan.iter().map(|s| s.end).collect();
        assert_eq!(ends, vec![1.0, 2.0, 2.5, 3.0, 4.0, 5.0]);
        assert_eq!(plan[1].checkpoint, Some(0));
        assert!(plan[1].check && !plan[2].check);
    }
}

//! Event-driven simulation of branching Brownian motion with a
//! piecewise-constant diffusion coefficient.

mod classify;
mod genealogy;
mod prune;
mod sim;

pub use classify::{classify_path, ClassifyParams, PathFlag, PathFlags};
pub use genealogy::{gaussian_consistency, sample_pairs, ConsistencyBucket, ConsistencyReport, Genealogy, PairSample};
pub use prune::{LookaheadParams, LookaheadRule, PruneRule, Pruning, SurvivalTable};
pub use sim::{
    sample_max, simulate, Checkpoint, Particle, Population, SimSpec, DEFAULT_POPULATION_CAP,
};

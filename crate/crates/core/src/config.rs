//! TOML experiment configuration.
//!
//! ```toml
//! [profile]
//! kind = "plus"
//! alpha = 0.3
//! horizon = 12.0
//!
//! [engine]
//! pruning = "below-max"
//!
//! [analysis]
//! checkpoints = [4.0, 8.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ClassifyParams, LookaheadParams, LookaheadRule, PruneRule, Pruning, SimSpec, DEFAULT_POPULATION_CAP};
use crate::error::{config, Result};
use crate::fkpp::GridSpec;
use crate::model::{BranchingLaw, ProfileConfig, SpeedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruningKind {
    Off,
    #[default]
    BelowMax,
    Lookahead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub pruning: PruningKind,
    /// Depth below the running maximum for `below-max`; `3 sqrt(t) + 6` when absent.
    pub depth: Option<f64>,
    pub check_interval: f64,
    pub lookahead: LookaheadParams,
    pub cap: usize,
    pub max_reruns: u32,
    /// Master seed; `--seed` overrides it.
    pub seed: u64,
    /// Replicate count; `--replicates` overrides it.
    pub replicates: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            pruning: PruningKind::BelowMax,
            depth: None,
            check_interval: 1.0,
            lookahead: LookaheadParams::default(),
            cap: DEFAULT_POPULATION_CAP,
            max_reruns: 6,
            seed: 0,
            replicates: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Times at which the derivative and McKean martingales are recorded.
    pub checkpoints: Vec<f64>,
    pub mckean_sigmas: Vec<f64>,
    /// Particles within this distance of the maximum get ancestor offsets.
    pub top_depth: f64,
    /// Particles within this distance of the maximum are kept as extremal points.
    pub retention: f64,
    /// Cluster lags `zeta`: ancestor labels are stored at `t - zeta`.
    pub label_lags: Vec<f64>,
    /// Classify the paths of the top particles.
    pub classify: bool,
    pub classify_params: ClassifyParams,
    /// Spacing of the snapshots used by the barrier test.
    pub barrier_step: f64,
    /// Spacing of front samples in `fkpp-front` traces.
    pub front_interval: f64,
    /// Checkpoint whose `Z` feeds the law fit.
    pub law_fit_r: Option<f64>,
    /// Horizons solved by `fkpp-front`; the profile horizon when absent.
    pub front_horizons: Option<Vec<f64>>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            checkpoints: Vec::new(),
            mckean_sigmas: vec![1.0],
            top_depth: 1.0,
            retention: 10.0,
            label_lags: Vec::new(),
            classify: false,
            classify_params: ClassifyParams::default(),
            barrier_step: 1.0,
            front_interval: 1.0,
            law_fit_r: None,
            front_horizons: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: ProfileConfig,
    #[serde(default)]
    pub law: BranchingLaw,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub solver: GridSpec,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    pub fn new(profile: SpeedProfile) -> Self {
        Self {
            profile: profile.into(),
            law: BranchingLaw::binary(),
            engine: EngineConfig::default(),
            solver: GridSpec::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(e.to_string()))
    }

    pub fn speed_profile(&self) -> Result<SpeedProfile> {
        SpeedProfile::try_from(self.profile)
    }

    pub fn horizon(&self) -> f64 {
        self.profile.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.speed_profile()?.horizon();
        let a = &self.analysis;
        if let Some(c) = a.checkpoints.iter().find(|c| !(**c >= 0.0 && **c <= t)) {
            return Err(config(format!("checkpoint {c} outside [0, {t}]")));
        }
        if a.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config("checkpoints must be strictly increasing"));
        }
        if let Some(z) = a.label_lags.iter().find(|z| !(**z >= 0.0 && **z <= t)) {
            return Err(config(format!("label lag {z} outside [0, {t}]")));
        }
        if a.mckean_sigmas.iter().any(|s| !s.is_finite()) {
            return Err(config("McKean sigmas must be finite"));
        }
        if !(a.top_depth >= 0.0) || !(a.retention >= a.top_depth) {
            return Err(config("need 0 <= top_depth <= retention"));
        }
        if !(a.barrier_step > 0.0) || !(a.front_interval > 0.0) {
            return Err(config("barrier_step and front_interval must be > 0"));
        }
        if let Some(r) = a.law_fit_r {
            if !a.checkpoints.iter().any(|c| (c - r).abs() < 1e-9) {
                return Err(config(format!("law_fit_r = {r} is not among the checkpoints")));
            }
        }
        if let Some(h) = &a.front_horizons {
            if h.is_empty() {
                return Err(config("front_horizons is empty"));
            }
            if let Some(t) = h.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
                return Err(config(format!("front horizon {t} must be positive")));
            }
        }
        if self.engine.pruning == PruningKind::BelowMax {
            self.prune_rule(t)?;
        }
        Ok(())
    }

    fn prune_rule(&self, t: f64) -> Result<PruneRule> {
        let depth = self.engine.depth.unwrap_or(PruneRule::for_horizon(t).depth);
        PruneRule::new(depth, self.engine.check_interval, t)
    }

    /// Build the pruning rule; `lookahead` solves the survival table here.
    pub fn pruning(&self) -> Result<Pruning> {
        let profile = self.speed_profile()?;
        Ok(match self.engine.pruning {
            PruningKind::Off => Pruning::Off,
            PruningKind::BelowMax => Pruning::BelowMax(self.prune_rule(profile.horizon())?),
            PruningKind::Lookahead => {
                let mut rule = LookaheadRule::for_profile(profile, &self.law, self.solver, self.engine.lookahead)?;
                rule.resolve_depth = self.analysis.top_depth;
                Pruning::Lookahead(rule)
            }
        })
    }

    /// Horizons for front solves.
    pub fn front_horizons(&self) -> Vec<f64> {
        self.analysis
            .front_horizons
            .clone()
            .unwrap_or_else(|| vec![self.horizon()])
    }

    /// Label snapshot times `t - zeta` for positive lags.
    pub fn label_times(&self) -> Vec<f64> {
        let t = self.horizon();
        let mut v: Vec<f64> = self
            .analysis
            .label_lags
            .iter()
            .filter(|z| **z > 0.0)
            .map(|z| t - z)
            .collect();
        sort_dedup(&mut v);
        v
    }

    /// Every time at which the engine must snapshot ancestors.
    pub fn engine_checkpoints(&self) -> Result<Vec<f64>> {
        let profile = self.speed_profile()?;
        let t = profile.horizon();
        let a = &self.analysis;
        let mut v = a.checkpoints.clone();
        v.push(profile.change_time());
        v.extend(self.label_times());
        if a.classify {
            let p = &a.classify_params;
            v.push(p.beta_time(t).min(t));
            let half = profile.change_time();
            v.extend(
                (0..)
                    .map(|k| p.r + k as f64 * a.barrier_step)
                    .take_while(|q| *q <= half + 1e-9),
            );
        }
        v.retain(|c| *c >= 0.0 && *c <= t);
        sort_dedup(&mut v);
        Ok(v)
    }

    pub fn sim_spec(&self) -> Result<SimSpec> {
        self.validate()?;
        let mut spec = SimSpec::new(self.speed_profile()?, self.law.clone())
            .with_pruning(self.pruning()?)
            .with_checkpoints(self.engine_checkpoints()?)
            .with_cap(self.engine.cap);
        spec.max_reruns = self.engine.max_reruns;
        Ok(spec)
    }
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProfileKind;

    const SAMPLE: &str = r#"
[profile]
kind = "plus"
alpha = 0.3
horizon = 12.0

[law]
offspring = [0.0, 1.0]

[engine]
pruning = "below-max"
check_interval = 0.5

[solver]
dx = 0.1

[analysis]
checkpoints = [4.0, 8.0]
label_lags = [2.0]
classify = true
"#;

    #[test]
    fn parses_sections() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.profile.kind, ProfileKind::Plus);
        assert_eq!(c.engine.check_interval, 0.5);
        assert_eq!(c.solver.dx, 0.1);
        assert_eq!(c.solver.dt_factor, GridSpec::default().dt_factor);
        assert_eq!(c.analysis.mckean_sigmas, vec![1.0]);
        assert_eq!(c.label_times(), vec![10.0]);
        let cps = c.engine_checkpoints().unwrap();
        for want in [1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12f64.powf(0.4)] {
            assert!(cps.iter().any(|c| (c - want).abs() < 1e-9), "{want} missing from {cps:?}");
        }
        c.sim_spec().unwrap();
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml_str("[profile]\nkind = \"plus\"\nalpha = 0.3\nhorizon = 12.0\n[analysis]\ncheckpoints = [13.0]").is_err());
        assert!(ExperimentConfig::from_toml_str("[profile]\nkind = \"sideways\"\nhorizon = 12.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[profile]\nkind = \"homogeneous\"\nhorizon = 12.0\n[engine]\ndepth = 1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[profile]\nkind = \"homogeneous\"\nhorizon = 12.0\n[engine]\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("[profile]\nkind = \"homogeneous\"\nhorizon = 12.0\n[analysis]\nfront_horizons = []").is_err());
        assert!(ExperimentConfig::from_toml_str("[profile]\nkind = \"homogeneous\"\nhorizon = 12.0\n[law]\noffspring = [0.5, 0.5]").is_err());
    }
}

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::sim::Particle;
use crate::error::{Error, Result};
use crate::model::{Shape, Sign, SpeedProfile};

/// Path events tested on the ancestral snapshots of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathFlag {
    /// Ancestor at `t/2` inside the localisation window.
    InG,
    /// Below the line `sqrt2 q` at every checkpoint `q` in `[r, t/2]`.
    InT,
    /// At `t^beta`, at least `t^(beta delta)` below `sqrt2 t^beta`.
    InH,
}

impl fmt::Display for PathFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathFlag::InG => "InG",
            PathFlag::InT => "InT",
            PathFlag::InH => "InH",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<PathFlag>", from = "Vec<PathFlag>")]
pub struct PathFlags {
    pub in_g: bool,
    pub in_t: bool,
    pub in_h: bool,
}

impl PathFlags {
    pub fn contains(&self, flag: PathFlag) -> bool {
        match flag {
            PathFlag::InG => self.in_g,
            PathFlag::InT => self.in_t,
            PathFlag::InH => self.in_h,
        }
    }
}

impl From<PathFlags> for Vec<PathFlag> {
    fn from(f: PathFlags) -> Self {
        [PathFlag::InG, PathFlag::InT, PathFlag::InH]
            .into_iter()
            .filter(|&x| f.contains(x))
            .collect()
    }
}

impl From<Vec<PathFlag>> for PathFlags {
    fn from(v: Vec<PathFlag>) -> Self {
        Self {
            in_g: v.contains(&PathFlag::InG),
            in_t: v.contains(&PathFlag::InT),
            in_h: v.contains(&PathFlag::InH),
        }
    }
}

/// Window constants. `gamma` defaults to the profile exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyParams {
    pub a: f64,
    pub b: f64,
    pub gamma: Option<f64>,
    pub beta: f64,
    pub delta: f64,
    pub r: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            a: 4.0,
            b: 0.25,
            gamma: None,
            beta: 0.4,
            delta: 0.5,
            r: 1.0,
        }
    }
}

impl ClassifyParams {
    pub fn beta_time(&self, horizon: f64) -> f64 {
        horizon.powf(self.beta)
    }
}

/// Flags for one particle. Snapshots hold raw positions; all tests are made
/// on the first-phase path divided by `sigma_1`.
///
/// The decreasing-speed case (`Plus`) uses the window
/// `[-A t^gamma, -B t^gamma]` around `sqrt2 t/2`. `Minus` and the homogeneous
/// profile use `[-A sqrt(t), A sqrt(t)]` around `sqrt2 sigma_1 t/2`.
pub fn classify_path(
    particle: &Particle,
    profile: &SpeedProfile,
    params: &ClassifyParams,
) -> Result<PathFlags> {
    let t = profile.horizon();
    let half = profile.change_time();
    let s1 = profile.sigma1();
    let missing = |time: f64| Error::Precondition(format!("no ancestor snapshot at time {time}"));

    let at_half = particle.snapshot_at(half).ok_or_else(|| missing(half))? / s1;
    let in_g = match profile.shape() {
        Shape::TwoSpeed {
            sign: Sign::Plus,
            alpha,
        } => {
            let scale = t.powf(params.gamma.unwrap_or(alpha));
            let off = at_half - SQRT_2 * half;
            off >= -params.a * scale && off <= -params.b * scale
        }
        _ => {
            let off = at_half - SQRT_2 * s1 * half;
            off.abs() <= params.a * t.sqrt()
        }
    };

    let in_t = particle
        .ancestor_snapshots
        .iter()
        .filter(|(q, _)| *q >= params.r && *q <= half + 1e-9)
        .all(|&(q, x)| x / s1 <= SQRT_2 * q);

    let tb = params.beta_time(t);
    let at_beta = particle.snapshot_at(tb).ok_or_else(|| missing(tb))? / s1;
    let in_h = at_beta <= SQRT_2 * tb - tb.powf(params.delta);

    Ok(PathFlags { in_g, in_t, in_h })
}

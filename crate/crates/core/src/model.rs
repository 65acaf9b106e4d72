//! Speed profiles, offspring laws and the centering formulas shared by every
//! other module.

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Fraction of the horizon at which the speed switches.
pub const CHANGE_FRACTION: f64 = 0.5;

/// Coefficient of `ln t` in standard BBM, `3 / (2 sqrt 2)`.
pub const BRAMSON_LOG_COEFFICIENT: f64 = 3.0 / (2.0 * SQRT_2);

/// Direction of the speed change. `Plus` means the first half runs faster,
/// `sigma_1^2 = 1 + t^-alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => f.write_str("plus"),
            Sign::Minus => f.write_str("minus"),
        }
    }
}

/// Which of the two published forms of the Plus-case log coefficient to use.
///
/// `Sigma` is `3/(2 sqrt 2) (sigma_1 + sigma_2 (1 - 2 alpha))`, which depends on
/// `t`; `Asymptotic` replaces the sigmas by their limit and gives
/// `3/(2 sqrt 2) (2 - 2 alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogForm {
    Sigma,
    #[default]
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Homogeneous,
    TwoSpeed { sign: Sign, alpha: f64 },
}

/// Piecewise-constant variance profile on `[0, t]`.
///
/// The variance is `sigma_1^2` on `[0, t/2)` and `sigma_2^2` on `[t/2, t]`,
/// with `sigma_1^2 + sigma_2^2 = 2`, so that the cumulative speed
/// `Sigma^2_t(s) = t A_t(s/t)` ends at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileConfig", into = "ProfileConfig")]
pub struct SpeedProfile {
    shape: Shape,
    horizon: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
}

impl SpeedProfile {
    pub fn homogeneous(horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(config(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        Ok(Self {
            shape: Shape::Homogeneous,
            horizon,
            sigma1_sq: 1.0,
            sigma2_sq: 1.0,
        })
    }

    pub fn two_speed(sign: Sign, alpha: f64, horizon: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(config(format!("alpha must be positive, got {alpha}")));
        }
        if !(horizon.is_finite() && horizon > 1.0) {
            return Err(config(format!(
                "two-speed profiles need a horizon t > 1, got {horizon}"
            )));
        }
        let eps = horizon.powf(-alpha);
        let (sigma1_sq, sigma2_sq) = match sign {
            Sign::Plus => (1.0 + eps, 1.0 - eps),
            Sign::Minus => (1.0 - eps, 1.0 + eps),
        };
        Ok(Self {
            shape: Shape::TwoSpeed { sign, alpha },
            horizon,
            sigma1_sq,
            sigma2_sq,
        })
    }

    pub fn new(shape: Shape, horizon: f64) -> Result<Self> {
        match shape {
            Shape::Homogeneous => Self::homogeneous(horizon),
            Shape::TwoSpeed { sign, alpha } => Self::two_speed(sign, alpha, horizon),
        }
    }

    /// Same shape at a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.shape, horizon)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn sign(&self) -> Option<Sign> {
        match self.shape {
            Shape::Homogeneous => None,
            Shape::TwoSpeed { sign, .. } => Some(sign),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.shape {
            Shape::Homogeneous => None,
            Shape::TwoSpeed { alpha, .. } => Some(alpha),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.sigma1_sq
    }

    pub fn sigma2_sq(&self) -> f64 {
        self.sigma2_sq
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1_sq.sqrt()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2_sq.sqrt()
    }

    pub fn sigma_max_sq(&self) -> f64 {
        self.sigma1_sq.max(self.sigma2_sq)
    }

    /// Time of the speed change, `t/2`.
    pub fn change_time(&self) -> f64 {
        CHANGE_FRACTION * self.horizon
    }

    fn check_time(&self, s: f64, what: &str) -> Result<()> {
        if s.is_nan() || s < 0.0 || s > self.horizon {
            Err(domain(format!(
                "{what} = {s} outside [0, {}]",
                self.horizon
            )))
        } else {
            Ok(())
        }
    }

    /// Instantaneous variance at time `s`.
    pub fn sigma_squared(&self, s: f64) -> Result<f64> {
        self.check_time(s, "s")?;
        Ok(self.sigma_squared_unchecked(s))
    }

    #[inline]
    pub(crate) fn sigma_squared_unchecked(&self, s: f64) -> f64 {
        if s < self.change_time() {
            self.sigma1_sq
        } else {
            self.sigma2_sq
        }
    }

    /// `Sigma^2_t(s) = int_0^s sigma^2(u/t) du`.
    pub fn cumulative_speed(&self, s: f64) -> Result<f64> {
        self.check_time(s, "s")?;
        Ok(self.cumulative_speed_unchecked(s))
    }

    /// Cumulative speed extended linearly outside `[0, t]`.
    #[inline]
    pub(crate) fn cumulative_speed_unchecked(&self, s: f64) -> f64 {
        let half = self.change_time();
        if s <= half {
            self.sigma1_sq * s
        } else {
            self.sigma1_sq * half + self.sigma2_sq * (s - half)
        }
    }

    /// Covariance of two particle positions at times `s` and `r` whose most
    /// recent common ancestor split at time `d`.
    pub fn covariance(&self, s: f64, r: f64, d: f64) -> Result<f64> {
        self.check_time(s, "s")?;
        self.check_time(r, "r")?;
        self.check_time(d, "d")?;
        Ok(self.cumulative_speed_unchecked(d.min(s).min(r)))
    }

    /// Deterministic centering `m(t)` of the maximum, using the asymptotic
    /// form of the Plus-case log coefficient.
    pub fn recentering(&self) -> f64 {
        self.recentering_with(LogForm::Asymptotic)
    }

    pub fn recentering_with(&self, form: LogForm) -> f64 {
        let t = self.horizon;
        let prediction = self.correction_prediction();
        prediction.leading_slope(t) * t + prediction.log_coefficient_with(t, form) * t.ln()
    }

    pub fn correction_prediction(&self) -> CorrectionPrediction {
        match self.shape {
            Shape::Homogeneous => CorrectionPrediction::homogeneous(),
            Shape::TwoSpeed { sign, alpha } => log_correction_coefficient(sign, alpha),
        }
    }

    /// Short human-readable label, e.g. `plus(alpha=0.25)`.
    pub fn label(&self) -> String {
        match self.shape {
            Shape::Homogeneous => "homogeneous".to_string(),
            Shape::TwoSpeed { sign, alpha } => format!("{sign}(alpha={alpha})"),
        }
    }
}

/// Flat config block for a speed profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(alias = "sign")]
    pub kind: ProfileKind,
    #[serde(default)]
    pub alpha: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Homogeneous,
    Plus,
    Minus,
}

impl ProfileKind {
    pub fn shape(self, alpha: f64) -> Shape {
        match self {
            ProfileKind::Homogeneous => Shape::Homogeneous,
            ProfileKind::Plus => Shape::TwoSpeed {
                sign: Sign::Plus,
                alpha,
            },
            ProfileKind::Minus => Shape::TwoSpeed {
                sign: Sign::Minus,
                alpha,
            },
        }
    }
}

impl TryFrom<ProfileConfig> for SpeedProfile {
    type Error = Error;

    fn try_from(c: ProfileConfig) -> Result<Self> {
        SpeedProfile::new(c.kind.shape(c.alpha), c.horizon)
    }
}

impl From<SpeedProfile> for ProfileConfig {
    fn from(p: SpeedProfile) -> Self {
        let (kind, alpha) = match p.shape {
            Shape::Homogeneous => (ProfileKind::Homogeneous, 0.0),
            Shape::TwoSpeed { sign: Sign::Plus, alpha } => (ProfileKind::Plus, alpha),
            Shape::TwoSpeed { sign: Sign::Minus, alpha } => (ProfileKind::Minus, alpha),
        };
        ProfileConfig {
            kind,
            alpha,
            horizon: p.horizon,
        }
    }
}

/// Predicted leading slope and `ln t` coefficient of the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionPrediction {
    /// `None` for the homogeneous case.
    pub sign: Option<Sign>,
    pub alpha: f64,
    /// Asymptotic coefficient of `ln t`; always negative.
    pub log_coefficient: f64,
}

impl CorrectionPrediction {
    pub fn homogeneous() -> Self {
        Self {
            sign: None,
            alpha: f64::INFINITY,
            log_coefficient: -BRAMSON_LOG_COEFFICIENT,
        }
    }

    fn two_speed_regime(&self) -> bool {
        self.sign.is_some() && self.alpha <= 0.5
    }

    /// Coefficient of `t` at horizon `t`. Depends on `t` in the Plus case.
    pub fn leading_slope(&self, t: f64) -> f64 {
        match self.sign {
            Some(Sign::Plus) if self.two_speed_regime() => {
                let eps = t.powf(-self.alpha);
                SQRT_2 * ((1.0 + eps).sqrt() + (1.0 - eps).max(0.0).sqrt()) / 2.0
            }
            _ => SQRT_2,
        }
    }

    /// `ln t` coefficient in the requested form. The two forms differ only in
    /// the Plus case.
    pub fn log_coefficient_with(&self, t: f64, form: LogForm) -> f64 {
        match (self.sign, form) {
            (Some(Sign::Plus), LogForm::Sigma) => {
                let eps = t.powf(-self.alpha);
                let s1 = (1.0 + eps).sqrt();
                let s2 = (1.0 - eps).max(0.0).sqrt();
                if self.alpha < 0.5 {
                    -BRAMSON_LOG_COEFFICIENT * (s1 + s2 * (1.0 - 2.0 * self.alpha))
                } else {
                    -BRAMSON_LOG_COEFFICIENT * s1
                }
            }
            _ => self.log_coefficient,
        }
    }
}

/// Predicted log correction for a two-speed profile with exponent `alpha`.
///
/// For `alpha > 1/2` the homogeneous values are returned.
pub fn log_correction_coefficient(sign: Sign, alpha: f64) -> CorrectionPrediction {
    let log_coefficient = match sign {
        Sign::Minus if alpha <= 0.5 => -(1.0 + 4.0 * alpha) / (2.0 * SQRT_2),
        Sign::Plus if alpha < 0.5 => -BRAMSON_LOG_COEFFICIENT * (2.0 - 2.0 * alpha),
        _ => -BRAMSON_LOG_COEFFICIENT,
    };
    CorrectionPrediction {
        sign: Some(sign),
        alpha,
        log_coefficient,
    }
}

/// Offspring distribution `(p_1, p_2, ..., p_K)` with mean 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawConfig", into = "LawConfig")]
pub struct BranchingLaw {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawConfig {
    pub offspring: Vec<f64>,
}

impl TryFrom<LawConfig> for BranchingLaw {
    type Error = Error;

    fn try_from(c: LawConfig) -> Result<Self> {
        BranchingLaw::new(c.offspring)
    }
}

impl From<BranchingLaw> for LawConfig {
    fn from(l: BranchingLaw) -> Self {
        LawConfig {
            offspring: l.probabilities,
        }
    }
}

impl Default for BranchingLaw {
    fn default() -> Self {
        Self::binary()
    }
}

const LAW_TOLERANCE: f64 = 1e-12;

impl BranchingLaw {
    /// `probabilities[k - 1]` is the probability of `k` offspring.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(config("offspring law is empty"));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(config("offspring probabilities must be finite and non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > LAW_TOLERANCE {
            return Err(config(format!("offspring probabilities sum to {total}, not 1")));
        }
        let mean: f64 = probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum();
        if (mean - 2.0).abs() > LAW_TOLERANCE {
            return Err(config(format!("offspring mean is {mean}, must be 2")));
        }
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            probabilities,
            cumulative,
        })
    }

    /// Dyadic branching, `p_2 = 1`.
    pub fn binary() -> Self {
        Self::new(vec![0.0, 1.0]).expect("binary law is valid")
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn is_binary(&self) -> bool {
        self.probabilities.len() == 2 && self.probabilities[1] == 1.0
    }

    /// `K = sum k (k - 1) p_k`.
    pub fn second_factorial_moment(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let k = (i + 1) as f64;
                k * (k - 1.0) * p
            })
            .sum()
    }

    /// Inverse-CDF draw of the number of offspring from a uniform in `[0, 1)`.
    #[inline]
    pub fn offspring_count(&self, uniform: f64) -> usize {
        if self.is_binary() {
            return 2;
        }
        self.cumulative
            .iter()
            .position(|&c| uniform < c)
            .unwrap_or(self.cumulative.len() - 1)
            + 1
    }

    /// F-KPP nonlinearity `F(u) = (1 - u) - sum p_k (1 - u)^k`.
    pub fn nonlinearity(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(domain(format!("u = {u} outside [0, 1]")));
        }
        Ok(self.nonlinearity_unchecked(u))
    }

    #[inline]
    pub(crate) fn nonlinearity_unchecked(&self, u: f64) -> f64 {
        let w = 1.0 - u;
        if self.is_binary() {
            return w - w * w;
        }
        // Horner on sum_k p_k w^k.
        let g = self
            .probabilities
            .iter()
            .rev()
            .fold(0.0, |acc, p| (acc + p) * w);
        w - g
    }
}

//! Acceptance suite: every criterion at its pinned tolerance, grouped into
//! named suites.
//!
//! Each check produces one [`CriterionResult`]; a [`Report`] prints them as
//! `PASS`/`FAIL` lines. Criteria that share data (the homogeneous `t = 12`
//! batch) compute it once per report.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, PruningKind};
use crate::engine::{simulate, ClassifyParams, PruneRule, Pruning, SimSpec};
use crate::error::{config, Error, Result};
use crate::fkpp::{ordered_pair_run, solve_max_law, GridSpec, InitialCondition};
use crate::model::{log_correction_coefficient, BranchingLaw, Shape, Sign, SpeedProfile, BRAMSON_LOG_COEFFICIENT};
use crate::numerics::{ks_one_sample, ks_two_sample, least_squares, mean_and_se, median, Ecdf};
use crate::oracle::{bridge_stay_below, gaussian_max_bound, gumbel_double_log, many_to_one_level_count};
use crate::record::{write_jsonl, ReplicateRecord};
use crate::rng::{replicate_key, LineageRng};
use crate::runner::Runner;
use crate::stats::{
    lalley_sellke_fit, localisation_histogram, log_coefficient_trend, moves_toward, sample_model_law,
};

/// Suite names accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "all",
    "oracles",
    "front",
    "trend",
    "mckean",
    "lawfit",
    "localisation",
    "martingales",
    "engineering",
];

/// Pinned tolerances and sample sizes.
pub mod tolerance {
    pub const FRONT_SLOPE: f64 = 0.01;
    pub const FRONT_LOG_COEFFICIENT: f64 = 0.15;
    pub const FRONT_FIT_TIMES: (f64, f64) = (20.0, 100.0);
    pub const TREND_ALPHA: f64 = 0.25;
    pub const TREND_HORIZONS: [f64; 4] = [40.0, 80.0, 160.0, 320.0];
    pub const MCKEAN_KS: f64 = 0.02;
    pub const MCKEAN_REPLICATES: u64 = 10_000;
    pub const MCKEAN_HORIZON: f64 = 12.0;
    pub const TWO_SPEED_ALPHA: f64 = 0.3;
    pub const ORACLE_TRIALS: u64 = 100_000;
    pub const ORACLE_SIGMAS: f64 = 3.0;
    pub const LAW_C_RELATIVE: f64 = 0.05;
    pub const LAW_SYNTHETIC_SUP: f64 = 0.01;
    pub const LAW_REAL_SUP: f64 = 0.03;
    pub const LAW_Z_CHECKPOINT: f64 = 8.0;
    pub const GUMBEL_SLOPE_RELATIVE: f64 = 0.10;
    pub const GUMBEL_RANGE: (f64, f64) = (-1.0, 3.0);
    pub const LOCALISATION_HORIZONS: [f64; 3] = [15.0, 30.0, 60.0];
    pub const LOCALISATION_REPLICATES: u64 = 16;
    pub const LOCALISATION_RATIO_FACTOR: f64 = 2.0;
    pub const LOCALISATION_SQRT_WIDTH: f64 = 3.0;
    pub const MARTINGALE_KS: f64 = 0.03;
    pub const PRUNE_DOUBLING_KS: f64 = 0.005;
    pub const REFINEMENT_DX: f64 = 0.01;
}

use tolerance::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    /// Criterion number and case, e.g. `3-plus`.
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: &str, name: &str, passed: bool, detail: String) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{}] {}: {}", self.id, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub results: Vec<CriterionResult>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CriterionResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let passed = self.results.iter().filter(|r| r.passed).count();
        write!(f, "{passed}/{} criteria passed (suite {}, seed {})", self.results.len(), self.suite, self.seed)
    }
}

/// Run `suite` with master seed `seed`. `threads` sizes a dedicated pool;
/// results do not depend on it.
pub fn run_suite(suite: &str, seed: u64, threads: Option<usize>) -> Result<Report> {
    if !SUITES.contains(&suite) {
        return Err(config(format!("unknown suite `{suite}`; expected one of: {}", SUITES.join(", "))));
    }
    let work = || {
        let mut suite_run = Suite::new(seed);
        let results = suite_run.run(suite)?;
        Ok(Report {
            suite: suite.into(),
            seed,
            results,
        })
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

/// Config for large batches: only the maximum and the martingales are used,
/// so extremal points beyond the top particles are not kept.
fn batch_config(profile: SpeedProfile) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(profile);
    cfg.analysis.retention = cfg.analysis.top_depth;
    cfg
}

struct Suite {
    seed: u64,
    law: BranchingLaw,
    homogeneous: OnceLock<Vec<ReplicateRecord>>,
}

impl Suite {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            law: BranchingLaw::binary(),
            homogeneous: OnceLock::new(),
        }
    }

    fn run(&mut self, suite: &str) -> Result<Vec<CriterionResult>> {
        let mut out = Vec::new();
        let wants = |name: &str| suite == "all" || suite == name;
        if wants("front") {
            out.push(self.front()?);
        }
        if wants("trend") {
            out.extend(self.trend()?);
        }
        if wants("mckean") {
            out.extend(self.mckean()?);
        }
        if wants("oracles") {
            out.extend(self.oracles()?);
        }
        if wants("lawfit") {
            out.extend(self.lawfit()?);
        }
        if wants("localisation") {
            out.extend(self.localisation()?);
        }
        if wants("martingales") {
            out.extend(self.martingales()?);
        }
        if wants("engineering") {
            out.extend(self.engineering()?);
        }
        Ok(out)
    }

    /// Sub-seed for one experiment, so suites run alone or together agree.
    fn key(&self, experiment: u64) -> u64 {
        replicate_key(self.seed, 0xACCE_0000 + experiment)
    }

    /// Homogeneous `t = 12` batch with martingales at 4, 8 and 12.
    fn homogeneous_batch(&self) -> Result<&[ReplicateRecord]> {
        if let Some(b) = self.homogeneous.get() {
            return Ok(b);
        }
        let mut cfg = batch_config(SpeedProfile::homogeneous(MCKEAN_HORIZON)?);
        cfg.analysis.checkpoints = vec![4.0, LAW_Z_CHECKPOINT, MCKEAN_HORIZON];
        let records = Runner::new(cfg)?.run(self.key(3), MCKEAN_REPLICATES, None)?;
        Ok(self.homogeneous.get_or_init(|| records))
    }

    fn front(&self) -> Result<CriterionResult> {
        let (lo, hi) = FRONT_FIT_TIMES;
        let times: Vec<f64> = (0..)
            .map(|k| lo + 5.0 * k as f64)
            .take_while(|t| *t <= hi + 1e-9)
            .collect();
        let profile = SpeedProfile::homogeneous(hi)?;
        let (_, trace) = solve_max_law(profile, &self.law, &InitialCondition::Heaviside, GridSpec::default(), &times)?;
        let design: Vec<Vec<f64>> = trace.times.iter().map(|t| vec![1.0, *t, t.ln()]).collect();
        let coef = least_squares(&design, &trace.positions)
            .ok_or_else(|| Error::Precondition("singular front fit".into()))?;
        let (slope, log_c) = (coef[1], coef[2]);
        let passed = (slope - SQRT_2).abs() <= FRONT_SLOPE
            && (log_c + BRAMSON_LOG_COEFFICIENT).abs() <= FRONT_LOG_COEFFICIENT;
        Ok(CriterionResult::new(
            "1",
            "homogeneous front",
            passed,
            format!(
                "slope {slope:.5} (target {SQRT_2:.5} +/- {FRONT_SLOPE}), ln t coefficient {log_c:.4} (target {:.4} +/- {FRONT_LOG_COEFFICIENT})",
                -BRAMSON_LOG_COEFFICIENT
            ),
        ))
    }

    fn trend(&self) -> Result<Vec<CriterionResult>> {
        let alpha = TREND_ALPHA;
        let cases = [
            (Sign::Minus, "2-minus", -3.0 / (2.0 * SQRT_2), -1.0 / (2.0 * SQRT_2)),
            (Sign::Plus, "2-plus", -6.0 / (2.0 * SQRT_2), -3.0 / (2.0 * SQRT_2)),
        ];
        let mut out = Vec::new();
        for (sign, id, lo, hi) in cases {
            let fronts: Vec<(f64, f64)> = TREND_HORIZONS
                .par_iter()
                .map(|&t| {
                    let p = SpeedProfile::two_speed(sign, alpha, t)?;
                    let (field, _) = solve_max_law(p, &self.law, &InitialCondition::Heaviside, GridSpec::default(), &[])?;
                    let x = crate::fkpp::front_position(&field, 0.5)
                        .ok_or_else(|| Error::Solver(format!("no front at t = {t}")))?;
                    Ok((t, x))
                })
                .collect::<Result<_>>()?;
            let shape = Shape::TwoSpeed { sign, alpha };
            let fits = log_coefficient_trend(&fronts, shape)?;
            let target = log_correction_coefficient(sign, alpha).log_coefficient;
            let bracketed = fits.iter().all(|f| lo < f.coefficient && f.coefficient < hi);
            let monotone = moves_toward(&fits, target);
            let coeffs: Vec<String> = fits.iter().map(|f| format!("{:.4}", f.coefficient)).collect();
            out.push(CriterionResult::new(
                id,
                &format!("{sign} coefficient bracket and trend"),
                bracketed && monotone,
                format!(
                    "fits dropping smallest horizons [{}] in ({lo:.4}, {hi:.4}): {bracketed}; monotone toward {target:.4}: {monotone}",
                    coeffs.join(", ")
                ),
            ));
        }
        Ok(out)
    }

    fn mckean(&self) -> Result<Vec<CriterionResult>> {
        let t = MCKEAN_HORIZON;
        let mut out = Vec::new();
        let cases = [
            ("3-homogeneous", SpeedProfile::homogeneous(t)?),
            ("3-plus", SpeedProfile::two_speed(Sign::Plus, TWO_SPEED_ALPHA, t)?),
            ("3-minus", SpeedProfile::two_speed(Sign::Minus, TWO_SPEED_ALPHA, t)?),
        ];
        for (k, (id, profile)) in cases.into_iter().enumerate() {
            let maxima: Vec<f64> = if profile.shape() == Shape::Homogeneous {
                self.homogeneous_batch()?.iter().filter_map(|r| r.max).collect()
            } else {
                let cfg = batch_config(profile);
                let records = Runner::new(cfg)?.run(self.key(30 + k as u64), MCKEAN_REPLICATES, None)?;
                records.iter().filter_map(|r| r.max).collect()
            };
            let (field, _) = solve_max_law(profile, &self.law, &InitialCondition::Heaviside, GridSpec::default(), &[])?;
            let ks = ks_one_sample(&maxima, |x| field.max_cdf(x));
            out.push(CriterionResult::new(
                id,
                &format!("MC vs PDE law of the maximum, {}", profile.label()),
                ks <= MCKEAN_KS && maxima.len() as u64 == MCKEAN_REPLICATES,
                format!("KS {ks:.4} <= {MCKEAN_KS} over {} replicates", maxima.len()),
            ));
        }
        Ok(out)
    }

    fn oracles(&self) -> Result<Vec<CriterionResult>> {
        Ok(vec![self.bridge()?, self.gaussian_max()?, self.level_count()?])
    }

    /// Discretely monitored bridges at `n` and `4n` steps, combined by
    /// Richardson extrapolation in `sqrt(dt)`.
    fn bridge(&self) -> Result<CriterionResult> {
        let (a, b, span) = (1.0, 1.0, 2.0);
        const FINE: usize = 4096;
        const COARSE_EVERY: usize = 4;
        let exact = bridge_stay_below(a, b, span)?;
        let key = self.key(40);
        let dt = span / FINE as f64;
        let samples: Vec<f64> = (0..ORACLE_TRIALS)
            .into_par_iter()
            .map(|i| {
                let mut rng = LineageRng::new(replicate_key(key, i));
                let mut w = vec![0.0; FINE + 1];
                for k in 1..=FINE {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w[k] = w[k - 1] + dt.sqrt() * z;
                }
                let end = w[FINE];
                let (mut fine, mut coarse) = (true, true);
                for (k, wk) in w.iter().enumerate().skip(1).take(FINE - 1) {
                    let s = k as f64 / FINE as f64;
                    let x = -a + wk - s * end + s * (a - b);
                    if x >= 0.0 {
                        fine = false;
                        if k % COARSE_EVERY == 0 {
                            coarse = false;
                            break;
                        }
                    }
                }
                2.0 * f64::from(u8::from(fine)) - f64::from(u8::from(coarse))
            })
            .collect();
        let (est, se) = mean_and_se(&samples);
        let passed = (est - exact).abs() <= ORACLE_SIGMAS * se;
        Ok(CriterionResult::new(
            "4-bridge",
            "bridge_stay_below vs bridge MC",
            passed,
            format!("a=b={a}, T={span}: exact {exact:.5}, MC {est:.5} +/- {se:.5} (SE)"),
        ))
    }

    fn gaussian_max(&self) -> Result<CriterionResult> {
        let (t, x) = (6.0, 1.0);
        let bound = gaussian_max_bound(x, t)?;
        let spec = SimSpec::new(SpeedProfile::homogeneous(t)?, self.law.clone());
        let key = self.key(41);
        let hits: Vec<f64> = (0..ORACLE_TRIALS)
            .into_par_iter()
            .map(|i| {
                let (pop, _) = simulate(&spec, replicate_key(key, i), |_| ())?;
                Ok(f64::from(u8::from(pop.max().is_some_and(|m| m > SQRT_2 * t + x))))
            })
            .collect::<Result<_>>()?;
        let (p, se) = mean_and_se(&hits);
        Ok(CriterionResult::new(
            "4-gaussian-max",
            "gaussian_max_bound dominates unpruned MC",
            p <= bound + ORACLE_SIGMAS * se,
            format!("t={t}, x={x}: P(max > sqrt2 t + x) = {p:.5} +/- {se:.5}, bound {bound:.5}"),
        ))
    }

    fn level_count(&self) -> Result<CriterionResult> {
        // (profile, time, level)
        let cases = [
            (SpeedProfile::homogeneous(5.0)?, 5.0, 3.0),
            (SpeedProfile::two_speed(Sign::Minus, TWO_SPEED_ALPHA, 6.0)?, 3.0, 1.5),
        ];
        let mut passed = true;
        let mut details = Vec::new();
        for (k, (profile, s, level)) in cases.into_iter().enumerate() {
            let expected = many_to_one_level_count(&profile, s, level)?;
            let spec = SimSpec::new(profile, self.law.clone()).with_checkpoints(vec![s]);
            let key = self.key(42 + k as u64);
            let counts: Vec<f64> = (0..ORACLE_TRIALS)
                .into_par_iter()
                .map(|i| {
                    let (_, obs) = simulate(&spec, replicate_key(key, i), |cp| {
                        cp.positions.iter().filter(|x| **x > level).count() as f64
                    })?;
                    Ok(obs[0])
                })
                .collect::<Result<_>>()?;
            let (m, se) = mean_and_se(&counts);
            passed &= (m - expected).abs() <= ORACLE_SIGMAS * se;
            details.push(format!("{} s={s} a={level}: expected {expected:.3}, MC {m:.3} +/- {se:.3}", profile.label()));
        }
        Ok(CriterionResult::new(
            "4-level-count",
            "many_to_one_level_count vs MC",
            passed,
            details.join("; "),
        ))
    }

    fn lawfit(&self) -> Result<Vec<CriterionResult>> {
        let n = ORACLE_TRIALS;
        let c_true = 0.8;
        let key = self.key(50);
        // Z ~ Exp(1); the maximum given Z from the model law.
        let (z, maxima): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| {
                let mut rng = LineageRng::new(replicate_key(key, i));
                let z = -(1.0 - rng.uniform()).ln();
                let u = 1.0 - rng.uniform();
                (z, sample_model_law(c_true, z, u))
            })
            .unzip();
        let synthetic = lalley_sellke_fit(&maxima, &z, None)?;
        let rel = (synthetic.c_hat / c_true - 1.0).abs();
        let mut out = vec![CriterionResult::new(
            "5-synthetic",
            "law fit recovers planted constant",
            rel <= LAW_C_RELATIVE && synthetic.sup_distance <= LAW_SYNTHETIC_SUP,
            format!(
                "c {:.4} vs {c_true} (rel. error {rel:.4} <= {LAW_C_RELATIVE}), sup distance {:.4} <= {LAW_SYNTHETIC_SUP}",
                synthetic.c_hat, synthetic.sup_distance
            ),
        )];

        let records = self.homogeneous_batch()?;
        let (real_max, real_z): (Vec<f64>, Vec<f64>) = records
            .iter()
            .filter_map(|r| Some((r.recentered_max()?, r.z_at(LAW_Z_CHECKPOINT)?)))
            .unzip();
        let real = lalley_sellke_fit(&real_max, &real_z, None)?;
        out.push(CriterionResult::new(
            "5-real",
            "law fit to MC maxima at t = 12",
            real.sup_distance <= LAW_REAL_SUP,
            format!(
                "Z from r = {LAW_Z_CHECKPOINT}, c {:.4}, sup distance {:.4} <= {LAW_REAL_SUP} over {} replicates",
                real.c_hat,
                real.sup_distance,
                real_max.len()
            ),
        ));

        // Gumbel slope on the model law with Z = 1; the MC slope is reported.
        let key = self.key(51);
        let plain: Vec<f64> = (0..n)
            .map(|i| sample_model_law(c_true, 1.0, 1.0 - LineageRng::new(replicate_key(key, i)).uniform()))
            .collect();
        let (lo, hi) = GUMBEL_RANGE;
        let slope = |sample: &[f64]| {
            let ecdf = Ecdf::new(sample);
            let grid: Vec<(f64, f64)> = (0..=40)
                .map(|k| lo + (hi - lo) * k as f64 / 40.0)
                .map(|y| (y, ecdf.eval(y)))
                .collect();
            gumbel_double_log(&grid).slope_on(lo, hi)
        };
        let synthetic_slope = slope(&plain).unwrap_or(f64::NAN);
        let mc_slope = slope(&real_max).unwrap_or(f64::NAN);
        out.push(CriterionResult::new(
            "5-gumbel",
            "double-log slope",
            (synthetic_slope / SQRT_2 - 1.0).abs() <= GUMBEL_SLOPE_RELATIVE,
            format!(
                "slope on y in [{lo}, {hi}] {synthetic_slope:.4} (target {SQRT_2:.4} +/- {:.0}%); MC maxima slope {mc_slope:.4}",
                100.0 * GUMBEL_SLOPE_RELATIVE
            ),
        ));
        Ok(out)
    }

    fn localisation_medians(&self, sign: Sign, experiment: u64) -> Result<Vec<(f64, f64)>> {
        LOCALISATION_HORIZONS
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let profile = SpeedProfile::two_speed(sign, TWO_SPEED_ALPHA, t)?;
                let mut cfg = ExperimentConfig::new(profile);
                cfg.engine.pruning = PruningKind::Lookahead;
                let runner = Runner::new(cfg)?;
                let depth = runner.config().analysis.top_depth;
                let records = runner.run(self.key(experiment + k as u64), LOCALISATION_REPLICATES, None)?;
                let hist = localisation_histogram(&records, &profile, depth, &ClassifyParams::default(), 20);
                let m = hist
                    .median_offset
                    .ok_or_else(|| Error::Precondition(format!("no ancestor offsets at t = {t}")))?;
                Ok((t, m))
            })
            .collect()
    }

    fn localisation(&self) -> Result<Vec<CriterionResult>> {
        let alpha = TWO_SPEED_ALPHA;
        let plus = self.localisation_medians(Sign::Plus, 60)?;
        let mut ok = plus.iter().all(|(_, m)| *m > 0.0);
        let mut parts = vec![format!("medians {}", fmt_pairs(&plus))];
        for w in plus.windows(2) {
            let ((t1, m1), (t2, m2)) = (w[0], w[1]);
            let ratio = m2 / m1;
            let expected = (t2 / t1).powf(alpha);
            let within = ratio > 0.0
                && ratio <= expected * LOCALISATION_RATIO_FACTOR
                && ratio >= expected / LOCALISATION_RATIO_FACTOR;
            ok &= within;
            parts.push(format!("ratio {t2}/{t1} {ratio:.3} vs {expected:.3}"));
        }
        let mut out = vec![CriterionResult::new(
            "6-plus",
            "Plus ancestor offsets scale like t^alpha",
            ok,
            parts.join("; "),
        )];

        let minus = self.localisation_medians(Sign::Minus, 70)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for &(t, m) in &minus {
            let centre = SQRT_2 * t.powf(1.0 - alpha) / 4.0;
            let half = LOCALISATION_SQRT_WIDTH * t.sqrt();
            ok &= (m - centre).abs() <= half;
            parts.push(format!("t={t}: median {m:.3} in {centre:.3} +/- {half:.3}"));
        }
        out.push(CriterionResult::new(
            "6-minus",
            "Minus ancestor offsets in window",
            ok,
            parts.join("; "),
        ));
        Ok(out)
    }

    fn martingales(&self) -> Result<Vec<CriterionResult>> {
        let records = self.homogeneous_batch()?;
        let z = |r: f64| -> Vec<f64> { records.iter().filter_map(|rec| rec.z_at(r)).collect() };
        let (z8, z12) = (z(8.0), z(12.0));
        let ks = ks_two_sample(&z8, &z12);
        let (m8, m12) = (median(&z8), median(&z12));
        let mut out = vec![CriterionResult::new(
            "7-derivative",
            "derivative martingale settles",
            ks <= MARTINGALE_KS && m8 > 0.0 && m12 > 0.0,
            format!("KS(Z(8), Z(12)) {ks:.4} <= {MARTINGALE_KS}; medians {m8:.4}, {m12:.4}"),
        )];
        let ys: Vec<(f64, f64)> = [4.0, 8.0, 12.0]
            .iter()
            .map(|&r| {
                let v: Vec<f64> = records.iter().filter_map(|rec| rec.y_at(r, 1.0)).collect();
                (r, median(&v))
            })
            .collect();
        let decreasing = ys.windows(2).all(|w| w[1].1 < w[0].1);
        out.push(CriterionResult::new(
            "7-mckean",
            "critical McKean martingale decays",
            decreasing,
            format!("Y_1 medians {}", fmt_pairs(&ys)),
        ));
        Ok(out)
    }

    fn engineering(&self) -> Result<Vec<CriterionResult>> {
        Ok(vec![
            self.determinism()?,
            self.prune_doubling()?,
            self.refinement()?,
            self.comparison()?,
        ])
    }

    fn determinism(&self) -> Result<CriterionResult> {
        let mut cfg = ExperimentConfig::new(SpeedProfile::two_speed(Sign::Plus, TWO_SPEED_ALPHA, 8.0)?);
        cfg.analysis.checkpoints = vec![2.0, 4.0];
        cfg.analysis.label_lags = vec![1.0];
        cfg.analysis.classify = true;
        let bytes = |threads| -> Result<Vec<u8>> {
            let records = Runner::new(cfg.clone())?.run(self.key(80), 40, threads)?;
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &records)?;
            Ok(buf)
        };
        let (a, b) = (bytes(Some(1))?, bytes(Some(2))?);
        Ok(CriterionResult::new(
            "8-determinism",
            "same seed gives identical bytes",
            a == b && !a.is_empty(),
            format!("{} bytes of JSONL, 1 vs 2 threads", a.len()),
        ))
    }

    fn prune_doubling(&self) -> Result<CriterionResult> {
        let t = 10.0;
        let profile = SpeedProfile::homogeneous(t)?;
        let rule = PruneRule::for_horizon(t);
        let maxima = |rule: PruneRule| -> Result<Vec<f64>> {
            let spec = SimSpec::new(profile, self.law.clone()).with_pruning(Pruning::BelowMax(rule));
            let key = self.key(81);
            (0..2000u64)
                .into_par_iter()
                .map(|i| {
                    let (pop, _) = simulate(&spec, replicate_key(key, i), |_| ())?;
                    pop.max().ok_or(Error::EmptyPopulation)
                })
                .collect()
        };
        let ks = ks_two_sample(&maxima(rule.clone())?, &maxima(rule.doubled())?);
        Ok(CriterionResult::new(
            "8-prune-doubling",
            "pruning depth does not move the maximum",
            ks <= PRUNE_DOUBLING_KS,
            format!("t={t}, depth {:.2} vs {:.2}: KS {ks:.4} <= {PRUNE_DOUBLING_KS}", rule.depth, rule.doubled().depth),
        ))
    }

    fn refinement(&self) -> Result<CriterionResult> {
        let t = 20.0;
        let profile = SpeedProfile::homogeneous(t)?;
        let front = |dx: f64| -> Result<f64> {
            let (field, _) = solve_max_law(profile, &self.law, &InitialCondition::Heaviside, GridSpec::default().with_dx(dx), &[])?;
            crate::fkpp::front_position(&field, 0.5).ok_or_else(|| Error::Solver("no front".into()))
        };
        let (coarse, fine) = (front(0.05)?, front(0.025)?);
        let d = (coarse - fine).abs();
        Ok(CriterionResult::new(
            "8-refinement",
            "grid refinement",
            d <= REFINEMENT_DX,
            format!("t={t}: X = {coarse:.5} (dx 0.05) vs {fine:.5} (dx 0.025), difference {d:.5} <= {REFINEMENT_DX}"),
        ))
    }

    fn comparison(&self) -> Result<CriterionResult> {
        let t = 10.0;
        let profiles = [
            SpeedProfile::homogeneous(t)?,
            SpeedProfile::two_speed(Sign::Plus, TWO_SPEED_ALPHA, t)?,
            SpeedProfile::two_speed(Sign::Minus, TWO_SPEED_ALPHA, t)?,
        ];
        let step_at = |x0: f64, height: f64| {
            InitialCondition::Function(Arc::new(move |x: f64| if x < x0 { height } else { 0.0 }))
        };
        let pairs = [
            (step_at(-1.0, 1.0), InitialCondition::Heaviside),
            (step_at(0.0, 0.5), step_at(0.0, 1.0)),
            (InitialCondition::Heaviside, step_at(2.0, 1.0)),
        ];
        let grid = GridSpec::default().with_dx(0.1);
        let mut runs = 0;
        let mut ordered = true;
        for p in profiles {
            let steps = (t / grid.dt_for(p.sigma_max_sq())).ceil() as usize;
            for (low, high) in &pairs {
                ordered &= ordered_pair_run(p, &self.law, low, high, grid, steps)?;
                runs += 1;
            }
        }
        Ok(CriterionResult::new(
            "8-comparison",
            "comparison principle",
            ordered,
            format!("{runs} ordered pairs over t = {t} on homogeneous, Plus and Minus profiles stay ordered: {ordered}"),
        ))
    }
}

fn fmt_pairs(pairs: &[(f64, f64)]) -> String {
    pairs
        .iter()
        .map(|(t, v)| format!("{t}: {v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

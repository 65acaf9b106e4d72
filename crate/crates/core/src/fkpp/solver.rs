use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::{front_position, FkppField};
use crate::error::{config, Error, Result};
use crate::model::{BranchingLaw, SpeedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Forward Euler with central differences; monotone under the CFL bound.
    #[default]
    Explicit,
    /// Crank-Nicolson diffusion with explicit reaction.
    CrankNicolson,
}

/// Time integration of the reaction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionStep {
    /// Forward Euler on the full right-hand side.
    Euler,
    /// Strang splitting: half-step reaction flow, diffusion, half-step
    /// reaction flow. The flow is exact for dyadic branching and RK4 otherwise.
    #[default]
    ExactFlow,
}

/// Grid and window policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub dx: f64,
    /// `dt = dt_factor * dx^2 / sigma_max^2`.
    pub dt_factor: f64,
    pub scheme: Scheme,
    pub reaction: ReactionStep,
    /// Window width; `None` means `12 sqrt(t) + 40` for horizon `t`.
    pub width: Option<f64>,
    /// Recenter when the front is further than `width * recenter_fraction`
    /// from the window center.
    pub recenter_fraction: f64,
    /// Level defining the front.
    pub level: f64,
    /// Verify range and monotonicity after every step.
    pub check_invariants: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dx: 0.05,
            dt_factor: 0.4,
            scheme: Scheme::Explicit,
            reaction: ReactionStep::ExactFlow,
            width: None,
            recenter_fraction: 0.125,
            level: 0.5,
            check_invariants: false,
        }
    }
}

impl GridSpec {
    pub fn with_dx(mut self, dx: f64) -> Self {
        self.dx = dx;
        self
    }

    pub fn width_for(&self, horizon: f64) -> f64 {
        self.width.unwrap_or(12.0 * horizon.max(0.0).sqrt() + 40.0)
    }

    pub fn dt_for(&self, sigma_max_sq: f64) -> f64 {
        self.dt_factor * self.dx * self.dx / sigma_max_sq
    }

    fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(config(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.dt_factor > 0.0) {
            return Err(config(format!("dt factor must be positive, got {}", self.dt_factor)));
        }
        if self.scheme == Scheme::Explicit && self.dt_factor > 1.0 {
            return Err(config(format!(
                "explicit scheme unstable: dt factor {} exceeds dx^2/sigma_max^2",
                self.dt_factor
            )));
        }
        if !(0.0 < self.recenter_fraction && self.recenter_fraction < 0.5) {
            return Err(config("recenter fraction must be in (0, 1/2)"));
        }
        Ok(())
    }
}

/// Initial data `u(0, .)`.
#[derive(Clone)]
pub enum InitialCondition {
    /// `u = 1` for `x < 0`, `0` for `x > 0`, `1/2` at the origin.
    Heaviside,
    /// `u(0, x) = 1 - exp(-phi(-x))` with `phi(z) = sum_l c_l 1{z >= u_l}`,
    /// given as `(c_l, u_l)` pairs.
    StepSum(Vec<(f64, f64)>),
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Heaviside => f.write_str("Heaviside"),
            InitialCondition::StepSum(s) => f.debug_tuple("StepSum").field(s).finish(),
            InitialCondition::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            InitialCondition::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::Heaviside => {
                if x < 0.0 {
                    1.0
                } else if x > 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            InitialCondition::StepSum(steps) => {
                let phi: f64 = steps
                    .iter()
                    .filter(|(_, u)| -x >= *u)
                    .map(|(c, _)| c)
                    .sum();
                -(-phi).exp_m1()
            }
            InitialCondition::Constant(c) => *c,
            InitialCondition::Function(f) => f(x),
        }
    }

    /// Values of `u` far to the left and right.
    fn far_field(&self) -> (f64, f64) {
        match self {
            InitialCondition::Heaviside => (1.0, 0.0),
            InitialCondition::StepSum(steps) => {
                let total: f64 = steps.iter().map(|(c, _)| c).sum();
                (-(-total).exp_m1(), 0.0)
            }
            InitialCondition::Constant(c) => (*c, *c),
            InitialCondition::Function(f) => (f(-1e6), f(1e6)),
        }
    }
}

/// Front positions sampled during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub level: f64,
}

impl FrontTrace {
    pub fn position_at(&self, time: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|t| (t - time).abs() < 1e-9)
            .map(|i| self.positions[i])
    }
}

/// Explicit or Crank-Nicolson F-KPP solver for one speed profile.
///
/// The field evolves in remaining time: after running for `tau`, `u(tau, x)`
/// is the probability that the maximum of a BBM started at time `t - tau`
/// exceeds `x` at the horizon `t`. The diffusion coefficient at solver time
/// `tau` is therefore `sigma^2(t - tau)`; the second-phase speed acts first.
#[derive(Debug, Clone)]
pub struct FkppSolver {
    field: FkppField,
    profile: SpeedProfile,
    law: Option<BranchingLaw>,
    grid: GridSpec,
    dt: f64,
    width: f64,
    steps_since_recenter_check: usize,
    auto_recenter: bool,
    monotone_data: bool,
    scratch: Vec<f64>,
}

const RECENTER_CHECK_EVERY: usize = 64;

impl FkppSolver {
    /// Solver with the F-KPP reaction term of `law`.
    pub fn new(
        profile: SpeedProfile,
        law: BranchingLaw,
        init: &InitialCondition,
        grid: GridSpec,
    ) -> Result<Self> {
        Self::build(profile, Some(law), init, grid)
    }

    /// Pure diffusion, `F = 0`.
    pub fn heat(profile: SpeedProfile, init: &InitialCondition, grid: GridSpec) -> Result<Self> {
        Self::build(profile, None, init, grid)
    }

    fn build(
        profile: SpeedProfile,
        law: Option<BranchingLaw>,
        init: &InitialCondition,
        grid: GridSpec,
    ) -> Result<Self> {
        grid.validate()?;
        let width = grid.width_for(profile.horizon());
        let half_cells = (0.5 * width / grid.dx).ceil() as usize;
        let n = 2 * half_cells + 1;
        let left_edge = -(half_cells as f64) * grid.dx;
        let values = (0..n)
            .map(|i| init.eval(left_edge + i as f64 * grid.dx).clamp(0.0, 1.0))
            .collect();
        let (left_boundary, right_boundary) = init.far_field();
        let field = FkppField {
            values,
            left_edge,
            dx: grid.dx,
            time: 0.0,
            window_shift_total: 0.0,
            left_boundary: left_boundary.clamp(0.0, 1.0),
            right_boundary: right_boundary.clamp(0.0, 1.0),
        };
        let monotone_data = field.is_monotone();
        let dt = grid.dt_for(profile.sigma_max_sq());
        Ok(Self {
            field,
            profile,
            law,
            grid,
            dt,
            width,
            steps_since_recenter_check: 0,
            auto_recenter: true,
            monotone_data,
            scratch: Vec::with_capacity(n),
        })
    }

    pub fn field(&self) -> &FkppField {
        &self.field
    }

    pub fn into_field(self) -> FkppField {
        self.field
    }

    pub fn profile(&self) -> &SpeedProfile {
        &self.profile
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.field.time
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Diffusion coefficient at solver time `tau`.
    pub fn diffusion_at(&self, tau: f64) -> f64 {
        let t = self.profile.horizon();
        self.profile.sigma_squared_unchecked((t - tau).clamp(0.0, t))
    }

    pub fn front(&self) -> Option<f64> {
        front_position(&self.field, self.grid.level)
    }

    /// Advance by one step of length `h <= dt` with constant coefficient.
    pub fn step(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0) {
            return Err(config(format!("time step must be positive, got {h}")));
        }
        if self.grid.scheme == Scheme::Explicit && h > self.dt * (1.0 + 1e-12) {
            return Err(config(format!(
                "step {h} exceeds the stable step {}",
                self.dt
            )));
        }
        // Coefficient at the step midpoint; steps never straddle t/2.
        let sigma_sq = self.diffusion_at(self.field.time + 0.5 * h);
        let a = 0.5 * sigma_sq * h / (self.grid.dx * self.grid.dx);
        match (self.grid.reaction, self.law.take()) {
            (_, None) => self.apply(a, h, |_| 0.0),
            (ReactionStep::Euler, Some(law)) => {
                if law.is_binary() {
                    self.apply(a, h, |u| u - u * u);
                } else {
                    self.apply(a, h, |u| law.nonlinearity_unchecked(u));
                }
                self.law = Some(law);
            }
            (ReactionStep::ExactFlow, Some(law)) => {
                self.react(&law, 0.5 * h);
                self.apply(a, h, |_| 0.0);
                self.react(&law, 0.5 * h);
                self.law = Some(law);
            }
        }
        self.field.time += h;
        if self.grid.check_invariants {
            self.verify_invariants()?;
        }
        self.steps_since_recenter_check += 1;
        if self.auto_recenter && self.steps_since_recenter_check >= RECENTER_CHECK_EVERY {
            self.steps_since_recenter_check = 0;
            self.recenter()?;
        }
        Ok(())
    }

    fn apply(&mut self, a: f64, h: f64, reaction: impl Fn(f64) -> f64) {
        let (bl, br) = (self.field.left_boundary, self.field.right_boundary);
        let new_bl = (bl + h * reaction(bl)).clamp(0.0, 1.0);
        let new_br = (br + h * reaction(br)).clamp(0.0, 1.0);
        match self.grid.scheme {
            Scheme::Explicit => {
                let v = &mut self.field.values;
                let n = v.len();
                let mut prev = bl;
                for i in 0..n {
                    let cur = v[i];
                    let next = if i + 1 < n { v[i + 1] } else { br };
                    let u = cur + a * (prev - 2.0 * cur + next) + h * reaction(cur);
                    v[i] = u.clamp(0.0, 1.0);
                    prev = cur;
                }
            }
            Scheme::CrankNicolson => {
                let v = &mut self.field.values;
                let n = v.len();
                // right-hand side
                self.scratch.clear();
                for i in 0..n {
                    let left = if i == 0 { bl } else { v[i - 1] };
                    let right = if i + 1 < n { v[i + 1] } else { br };
                    let mut r = (1.0 - a) * v[i] + 0.5 * a * (left + right) + h * reaction(v[i]);
                    if i == 0 {
                        r += 0.5 * a * new_bl;
                    }
                    if i + 1 == n {
                        r += 0.5 * a * new_br;
                    }
                    self.scratch.push(r);
                }
                solve_symmetric_tridiagonal(1.0 + a, -0.5 * a, &mut self.scratch, v);
                for u in v.iter_mut() {
                    *u = u.clamp(0.0, 1.0);
                }
            }
        }
        self.field.left_boundary = new_bl;
        self.field.right_boundary = new_br;
    }

    /// Advance `du/ds = F(u)` by `h` at every node and at the boundaries.
    fn react(&mut self, law: &BranchingLaw, h: f64) {
        let f = &mut self.field;
        if law.is_binary() {
            // logistic flow: u -> u e^h / (1 + u (e^h - 1))
            let grow = h.exp_m1();
            let flow = |u: f64| (u + u * grow) / (1.0 + u * grow);
            for u in f.values.iter_mut() {
                *u = flow(*u).clamp(0.0, 1.0);
            }
            f.left_boundary = flow(f.left_boundary).clamp(0.0, 1.0);
            f.right_boundary = flow(f.right_boundary).clamp(0.0, 1.0);
        } else {
            let rhs = |u: f64| law.nonlinearity_unchecked(u.clamp(0.0, 1.0));
            let rk4 = |u: f64| {
                let k1 = rhs(u);
                let k2 = rhs(u + 0.5 * h * k1);
                let k3 = rhs(u + 0.5 * h * k2);
                let k4 = rhs(u + h * k3);
                (u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0)
            };
            for u in f.values.iter_mut() {
                *u = rk4(*u);
            }
            f.left_boundary = rk4(f.left_boundary);
            f.right_boundary = rk4(f.right_boundary);
        }
    }

    fn verify_invariants(&self) -> Result<()> {
        if !self.field.is_in_unit_range() {
            return Err(Error::Solver(format!(
                "u left [0, 1] at time {}",
                self.field.time
            )));
        }
        if self.monotone_data && !self.field.is_monotone() {
            return Err(Error::Solver(format!(
                "monotone data lost monotonicity at time {}",
                self.field.time
            )));
        }
        Ok(())
    }

    /// Recenter the window on the front if it drifted too far.
    fn recenter(&mut self) -> Result<()> {
        let Some(front) = self.front() else {
            return Ok(());
        };
        let center = self.field.center();
        let drift = front - center;
        if drift.abs() > self.width * self.grid.recenter_fraction {
            let cells = (drift / self.grid.dx).round() as isize;
            self.field.shift_cells(cells);
        }
        let margin = self.width / 16.0;
        if front < self.field.left_edge + margin || front > self.field.right_edge() - margin {
            return Err(Error::Solver(format!(
                "front at {front} left the window [{}, {}]",
                self.field.left_edge,
                self.field.right_edge()
            )));
        }
        Ok(())
    }

    /// Step until solver time `target`, never straddling the speed change.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        let change = self.profile.horizon() - self.profile.change_time();
        while self.field.time < target - 1e-12 {
            let now = self.field.time;
            let mut h = self.dt.min(target - now);
            if now < change - 1e-12 && now + h > change {
                h = change - now;
            }
            self.step(h)?;
        }
        self.field.time = self.field.time.max(target);
        Ok(())
    }

    /// Run to `end`, recording the front at each of `checkpoints` (sorted,
    /// within `[time, end]`).
    pub fn run(&mut self, end: f64, checkpoints: &[f64]) -> Result<FrontTrace> {
        let mut trace = FrontTrace {
            level: self.grid.level,
            ..FrontTrace::default()
        };
        for &c in checkpoints.iter().filter(|c| **c <= end) {
            self.advance_to(c)?;
            if let Some(x) = self.front() {
                trace.times.push(c);
                trace.positions.push(x);
            }
        }
        self.advance_to(end)?;
        Ok(trace)
    }

    /// Run to `end`, calling `visit` with the field at each checkpoint.
    pub fn run_visiting(
        &mut self,
        checkpoints: &[f64],
        mut visit: impl FnMut(&FkppField),
    ) -> Result<()> {
        for &c in checkpoints {
            self.advance_to(c)?;
            visit(&self.field);
        }
        Ok(())
    }
}

/// Thomas algorithm for a constant symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off`. `rhs` is consumed as scratch.
fn solve_symmetric_tridiagonal(diag: f64, off: f64, rhs: &mut [f64], out: &mut [f64]) {
    let n = rhs.len();
    if n == 0 {
        return;
    }
    // `out` holds the modified super-diagonal during the sweep.
    let mut c_prev = off / diag;
    out[0] = c_prev;
    rhs[0] /= diag;
    for i in 1..n {
        let m = diag - off * c_prev;
        c_prev = off / m;
        out[i] = c_prev;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / m;
    }
    let mut x_next = rhs[n - 1];
    out[n - 1] = x_next;
    for i in (0..n - 1).rev() {
        let x = rhs[i] - out[i] * x_next;
        out[i] = x;
        x_next = x;
    }
}

/// Solve to the horizon of `profile` from `init`, recording the front at
/// `checkpoints`. With Heaviside data `1 - u(t, x) = P(max <= x)`.
pub fn solve_max_law(
    profile: SpeedProfile,
    law: &BranchingLaw,
    init: &InitialCondition,
    grid: GridSpec,
    checkpoints: &[f64],
) -> Result<(FkppField, FrontTrace)> {
    let mut solver = FkppSolver::new(profile, law.clone(), init, grid)?;
    let trace = solver.run(profile.horizon(), checkpoints)?;
    Ok((solver.into_field(), trace))
}

/// Evolve two fields in lockstep and report whether `low <= high` held at
/// every node after every step. Both windows are translated together.
pub fn ordered_pair_run(
    profile: SpeedProfile,
    law: &BranchingLaw,
    init_low: &InitialCondition,
    init_high: &InitialCondition,
    grid: GridSpec,
    steps: usize,
) -> Result<bool> {
    let mut low = FkppSolver::new(profile, law.clone(), init_low, grid)?;
    let mut high = FkppSolver::new(profile, law.clone(), init_high, grid)?;
    // Windows stay aligned: only `high` decides when to translate.
    low.auto_recenter = false;
    let dt = high.dt();
    let change = profile.horizon() - profile.change_time();
    let ordered = |a: &FkppField, b: &FkppField| {
        a.left_boundary <= b.left_boundary
            && a.right_boundary <= b.right_boundary
            && a.values.iter().zip(&b.values).all(|(x, y)| x <= y)
    };
    if !ordered(low.field(), high.field()) {
        return Ok(false);
    }
    for _ in 0..steps {
        let now = high.time();
        let mut h = dt;
        if now < change - 1e-12 && now + h > change {
            h = change - now;
        }
        high.step(h)?;
        low.step(h)?;
        let cells = ((high.field.left_edge - low.field.left_edge) / grid.dx).round() as isize;
        low.field.shift_cells(cells);
        if !ordered(low.field(), high.field()) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sign;

    fn homogeneous(t: f64) -> SpeedProfile {
        SpeedProfile::homogeneous(t).unwrap()
    }

    #[test]
    fn fixed_points_are_preserved() {
        let law = BranchingLaw::binary();
        for c in [0.0, 1.0] {
            let mut s = FkppSolver::new(homogeneous(5.0), law.clone(), &InitialCondition::Constant(c), GridSpec::default()).unwrap();
            s.advance_to(1.0).unwrap();
            assert!(s.field().values.iter().all(|u| *u == c));
        }
    }

    #[test]
    fn unstable_step_is_rejected() {
        let grid = GridSpec {
            dt_factor: 1.5,
            ..GridSpec::default()
        };
        let err = FkppSolver::new(homogeneous(5.0), BranchingLaw::binary(), &InitialCondition::Heaviside, grid);
        assert!(matches!(err, Err(Error::Config(_))));
        let mut ok = FkppSolver::new(homogeneous(5.0), BranchingLaw::binary(), &InitialCondition::Heaviside, GridSpec::default()).unwrap();
        let dt = ok.dt();
        assert!(ok.step(2.0 * dt).is_err());
    }

    #[test]
    fn heaviside_at_time_zero_is_the_point_mass_law() {
        let (field, _) = solve_max_law(homogeneous(0.0), &BranchingLaw::binary(), &InitialCondition::Heaviside, GridSpec::default(), &[]).unwrap();
        assert_eq!(field.max_cdf(-0.3), 0.0);
        assert_eq!(field.max_cdf(0.3), 1.0);
    }

    #[test]
    fn heat_equation_variance_grows_linearly() {
        // Derivative of a smoothed step is a Gaussian of variance v0; after
        // time s under pure diffusion its variance is v0 + sigma^2 s.
        let v0: f64 = 0.5;
        let init = InitialCondition::Function(Arc::new(move |x: f64| {
            crate::numerics::normal_upper_tail(x / v0.sqrt())
        }));
        let profile = SpeedProfile::two_speed(Sign::Plus, 0.5, 16.0).unwrap();
        let grid = GridSpec {
            dx: 0.02,
            width: Some(40.0),
            ..GridSpec::default()
        };
        let mut s = FkppSolver::heat(profile, &init, grid).unwrap();
        // solver time < t/2 uses sigma_2^2 = 0.75
        s.advance_to(2.0).unwrap();
        let f = s.field();
        let density: Vec<f64> = f.values.windows(2).map(|w| (w[0] - w[1]) / f.dx).collect();
        let mass: f64 = density.iter().sum::<f64>() * f.dx;
        let mid = |i: usize| f.x(i) + 0.5 * f.dx;
        let m1: f64 = density.iter().enumerate().map(|(i, d)| d * mid(i)).sum::<f64>() * f.dx / mass;
        let m2: f64 = density.iter().enumerate().map(|(i, d)| d * (mid(i) - m1).powi(2)).sum::<f64>() * f.dx / mass;
        let expected = v0 + 0.75 * 2.0;
        assert!((mass - 1.0).abs() < 1e-6);
        assert!(((m2 - expected) / expected).abs() < 0.01, "variance {m2} vs {expected}");
    }

    #[test]
    fn range_and_monotonicity_preserved() {
        let grid = GridSpec {
            check_invariants: true,
            ..GridSpec::default()
        };
        let law = BranchingLaw::new(vec![0.5, 0.0, 0.5]).unwrap();
        let profile = SpeedProfile::two_speed(Sign::Minus, 0.3, 6.0).unwrap();
        let mut s = FkppSolver::new(profile, law, &InitialCondition::Heaviside, grid).unwrap();
        for k in 1..=60 {
            s.advance_to(0.1 * k as f64).unwrap();
            assert!(s.field().is_monotone(), "lost monotonicity at {}", s.time());
        }
    }

    #[test]
    fn window_follows_the_front() {
        let mut s = FkppSolver::new(homogeneous(30.0), BranchingLaw::binary(), &InitialCondition::Heaviside, GridSpec::default()).unwrap();
        let trace = s.run(30.0, &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(trace.times.len(), 3);
        assert!(s.field().window_shift_total > 20.0);
        let x30 = trace.positions[2];
        assert!((x30 - (30.0 * std::f64::consts::SQRT_2 - 1.06 * 30f64.ln())).abs() < 2.0);
    }

    #[test]
    fn crank_nicolson_agrees_with_explicit() {
        let law = BranchingLaw::binary();
        let (_, a) = solve_max_law(homogeneous(10.0), &law, &InitialCondition::Heaviside, GridSpec::default(), &[10.0]).unwrap();
        let cn = GridSpec {
            scheme: Scheme::CrankNicolson,
            dt_factor: 1.0,
            ..GridSpec::default()
        };
        let (_, b) = solve_max_law(homogeneous(10.0), &law, &InitialCondition::Heaviside, cn, &[10.0]).unwrap();
        assert!((a.positions[0] - b.positions[0]).abs() < 0.02);
    }

    #[test]
    fn ordered_pairs() {
        let law = BranchingLaw::binary();
        let p = homogeneous(20.0);
        let grid = GridSpec::default();
        assert!(ordered_pair_run(p, &law, &InitialCondition::Heaviside, &InitialCondition::Heaviside, grid, 500).unwrap());
        // swapped order must fail immediately
        let smooth = InitialCondition::Function(Arc::new(|x: f64| if x < 0.0 { 1.0 } else { 0.5 * (-x).exp() }));
        assert!(!ordered_pair_run(p, &law, &smooth, &InitialCondition::Heaviside, grid, 10).unwrap());
    }
}

//! Machine-checkable reports: reduced-ODE residuals of the closed forms,
//! their limits, the maximum of the unlimited band, the `ln v` curvature
//! bound, the exponential envelopes of the crowd-effect system, the measured
//! front speed and observed convergence orders.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{asymptotics, bounds_model2, umax_model1, uniform_grid, ClosedForm, Profile};
use crate::error::{Error, Result};
use crate::params::{crowd_neutral, derive_params, ModelKind, ModelParams, RawParams};
use crate::pde::{init_state, measure_front_speed, run, FieldState, Grid1D, InitKind, SolverConfig};

/// Spacing of the traveling coordinate used for residual checks, cm.
pub const RESIDUAL_SPACING: f64 = 1e-3;
/// Residuals are evaluated on `[-RESIDUAL_HALF_WIDTH, RESIDUAL_HALF_WIDTH]`.
pub const RESIDUAL_HALF_WIDTH: f64 = 20.0;
/// Coordinate at which the closed forms are compared with their limits.
pub const LIMIT_PROBE: f64 = 40.0;
/// Smallest envelope slack.
pub const MIN_SLACK: f64 = 1e-6;

/// L-infinity and L2 norms of the reduced-ODE residual. `scale` is the
/// largest magnitude of any single term, for judging the residual's size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub linf: f64,
    pub l2: f64,
    pub scale: f64,
}

/// Residuals of the traveling-band ODEs
///
/// ```text
/// tau c u' - beta (ln v)' u' + (mu/2) u'' - tau gamma u (ln v)'' = 0
/// c v' - k u = 0            (unlimited)
/// c v' - k u v = 0          (limited)
/// ```
///
/// with `tau gamma = beta` for the crowd-free kinds.
struct Residual {
    tau_c: f64,
    beta: f64,
    half_mu: f64,
    tau_gamma: f64,
    c: f64,
    k: f64,
    limited: bool,
}

impl Residual {
    fn new(kind: ModelKind, params: &ModelParams) -> Result<Self> {
        if !kind.has_closed_form() {
            return Err(Error::Unsupported(kind));
        }
        Ok(Residual {
            tau_c: params.tau() * params.c(),
            beta: params.beta(),
            half_mu: 0.5 * params.mu(),
            tau_gamma: params.tau() * params.effective_gamma(kind),
            c: params.c(),
            k: params.k(),
            limited: kind.limited_substrate(),
        })
    }

    /// Returns the two residuals and the largest term magnitude.
    fn eval(&self, u: f64, du: f64, d2u: f64, v: f64, dln_v: f64, d2ln_v: f64) -> (f64, f64, f64) {
        let terms = [self.tau_c * du, -self.beta * dln_v * du, self.half_mu * d2u, -self.tau_gamma * u * d2ln_v];
        let consumed = if self.limited { self.k * u * v } else { self.k * u };
        let transport = self.c * v * dln_v;
        let scale = terms.iter().chain([&consumed, &transport]).fold(0.0f64, |m, t| m.max(t.abs()));
        (terms.iter().sum(), transport - consumed, scale)
    }
}

fn uniform_spacing(zeta: &[f64]) -> Result<f64> {
    if zeta.len() < 2 {
        return Err(Error::InvalidInput("need at least two coordinates".into()));
    }
    let h = (zeta[zeta.len() - 1] - zeta[0]) / (zeta.len() - 1) as f64;
    if h.is_nan() || h <= 0.0 || zeta.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidInput("coordinates must be uniformly spaced and increasing".into()));
    }
    Ok(h)
}

fn norms(residuals: impl Iterator<Item = (f64, f64, f64)>, h: f64) -> ResidualNorms {
    let (mut linf, mut sum, mut scale) = (0.0f64, 0.0, 0.0f64);
    for (ru, rv, s) in residuals {
        linf = linf.max(ru.abs()).max(rv.abs());
        sum += ru * ru + rv * rv;
        scale = scale.max(s);
    }
    ResidualNorms { linf, l2: (sum * h).sqrt(), scale }
}

/// Residual of a sampled profile with fourth-order central differences,
/// over all nodes at least two cells from either end.
pub fn ode_residual(profile: &Profile) -> Result<ResidualNorms> {
    let res = Residual::new(profile.kind, &profile.params)?;
    let h = uniform_spacing(&profile.zeta)?;
    let n = profile.len();
    if n < 5 {
        return Err(Error::InvalidInput("finite-difference residual needs at least five points".into()));
    }
    let u = &profile.u;
    let w: Vec<f64> = profile.v.iter().map(|v| v.ln()).collect();
    let d1 = |f: &[f64], i: usize| (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    let d2 =
        |f: &[f64], i: usize| (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h);
    Ok(norms((2..n - 2).map(|i| res.eval(u[i], d1(u, i), d2(u, i), profile.v[i], d1(&w, i), d2(&w, i))), h))
}

/// Residual of a closed form using its exact derivatives at `zeta`.
pub fn ode_residual_analytic(form: &ClosedForm, zeta: &[f64]) -> Result<ResidualNorms> {
    let res = Residual::new(form.kind(), form.params())?;
    let h = uniform_spacing(zeta)?;
    Ok(norms(
        zeta.iter().map(|&z| {
            let s = form.sample(z);
            res.eval(s.u, s.du, s.d2u, s.v(), s.dln_v, s.d2ln_v)
        }),
        h,
    ))
}

/// Largest `|second difference of ln v| / dx^2` over the interior nodes.
pub fn max_ln_v_curvature(profile: &Profile) -> f64 {
    let n = profile.len();
    if n < 3 {
        return 0.0;
    }
    let w: Vec<f64> = profile.v.iter().map(|v| v.ln()).collect();
    (1..n - 1)
        .map(|i| {
            let h1 = profile.zeta[i] - profile.zeta[i - 1];
            let h2 = profile.zeta[i + 1] - profile.zeta[i];
            (2.0 * ((w[i + 1] - w[i]) / h2 - (w[i] - w[i - 1]) / h1) / (h1 + h2)).abs()
        })
        .fold(0.0, f64::max)
}

/// Observed order between adjacent `(h, error)` pairs,
/// `ln(e_prev / e_next) / ln(h_prev / h_next)`, which is `log2(e_2h / e_h)` for halving.
pub fn convergence_order(pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput("convergence order needs at least two (h, error) pairs".into()));
    }
    if pairs.iter().any(|&(_, e)| e == 0.0) {
        return Err(Error::DegenerateInput("zero error, order undefined".into()));
    }
    if pairs.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::InvalidInput("spacings and errors must be positive and finite".into()));
    }
    if pairs.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidInput("spacings must be strictly decreasing".into()));
    }
    Ok(pairs.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect())
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Envelope containment at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSnapshot {
    pub t: f64,
    pub slack: f64,
    pub violations: usize,
    /// Smallest distance to the nearer envelope; negative outside.
    pub worst_margin: f64,
    pub v_violations: usize,
    pub v_worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub violations: usize,
    pub worst_margin: f64,
    /// Substrate envelope, reported but never gated.
    pub v_violations: usize,
    pub v_worst_margin: f64,
    pub snapshots: Vec<BoundSnapshot>,
}

fn coarse_difference(fine: &FieldState, coarse: &FieldState) -> Result<f64> {
    let (f, c) = (fine.grid, coarse.grid);
    if f.x_min != c.x_min || f.x_max != c.x_max || f.n - 1 != 2 * (c.n - 1) {
        return Err(Error::GridMismatch);
    }
    if (fine.t - coarse.t).abs() > 1e-9 * fine.t.abs().max(1.0) {
        return Err(Error::GridMismatch);
    }
    Ok(coarse.u.iter().enumerate().map(|(j, u)| (fine.u[2 * j] - u).abs()).fold(0.0, f64::max))
}

/// Checks `e^{lambda_- t} u_b(x - c t) - eps <= u(x, t) <= e^{lambda_+ t} u_b(x - c t) + eps`
/// on every snapshot of a crowd-effect unlimited run started from the
/// crowd-free band `baseline`. The slack is
/// `eps = max(MIN_SLACK, 3 max|u_dx - u_2dx|)` when a run at twice the spacing
/// is supplied, otherwise `MIN_SLACK`.
pub fn check_bounds(
    traj: &[FieldState],
    coarse: Option<&[FieldState]>,
    baseline: &ClosedForm,
    params: &ModelParams,
) -> Result<BoundReport> {
    if baseline.kind() != ModelKind::UnlimitedNoCrowd {
        return Err(Error::InvalidInput(format!("envelope baseline must be {}", ModelKind::UnlimitedNoCrowd)));
    }
    if crowd_neutral(params) {
        return Err(Error::DegenerateCrowd);
    }
    let first = traj.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let grid = first.grid;
    if traj.iter().any(|s| s.grid != grid) {
        return Err(Error::GridMismatch);
    }
    if let Some(coarse) = coarse {
        if coarse.len() != traj.len() {
            return Err(Error::GridMismatch);
        }
    }
    let x = grid.nodes();
    let c = params.c();
    let mut snapshots = Vec::with_capacity(traj.len());
    let mut rates = (0.0, 0.0);
    for (idx, state) in traj.iter().enumerate() {
        let slack = match coarse {
            Some(coarse) => MIN_SLACK.max(3.0 * coarse_difference(state, &coarse[idx])?),
            None => MIN_SLACK,
        };
        let zeta: Vec<f64> = x.iter().map(|xi| xi - c * state.t).collect();
        let base = baseline.profile(&zeta)?;
        let pair = bounds_model2(&base, state.t, params)?;
        rates = (pair.lambda_minus, pair.lambda_plus);
        let (lo, hi) = (pair.lower(), pair.upper());
        let (mut violations, mut worst) = (0, f64::INFINITY);
        for i in 0..grid.n {
            let margin = (state.u[i] - lo[i]).min(hi[i] - state.u[i]);
            worst = worst.min(margin);
            if margin < -slack {
                violations += 1;
            }
        }
        let (fm, fp) = ((pair.lambda_minus * state.t).exp(), (pair.lambda_plus * state.t).exp());
        let (f_lo, f_hi) = (fm.min(fp), fm.max(fp));
        let (mut v_violations, mut v_worst) = (0, f64::INFINITY);
        for i in 0..grid.n {
            let margin = (state.v[i] - f_lo * base.v[i]).min(f_hi * base.v[i] - state.v[i]);
            v_worst = v_worst.min(margin);
            if margin < -slack {
                v_violations += 1;
            }
        }
        snapshots.push(BoundSnapshot {
            t: state.t,
            slack,
            violations,
            worst_margin: worst,
            v_violations,
            v_worst_margin: v_worst,
        });
    }
    Ok(BoundReport {
        lambda_minus: rates.0,
        lambda_plus: rates.1,
        violations: snapshots.iter().map(|s| s.violations).sum(),
        worst_margin: snapshots.iter().map(|s| s.worst_margin).fold(f64::INFINITY, f64::min),
        v_violations: snapshots.iter().map(|s| s.v_violations).sum(),
        v_worst_margin: snapshots.iter().map(|s| s.v_worst_margin).fold(f64::INFINITY, f64::min),
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Residuals,
    Limits,
    Bounds,
    Speed,
    Convergence,
    All,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Residuals, Suite::Limits, Suite::Bounds, Suite::Speed, Suite::Convergence, Suite::All];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Residuals => "residuals",
            Suite::Limits => "limits",
            Suite::Bounds => "bounds",
            Suite::Speed => "speed",
            Suite::Convergence => "convergence",
            Suite::All => "all",
        }
    }

    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Residuals, Suite::Limits, Suite::Bounds, Suite::Speed, Suite::Convergence],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite `{s}`")))
    }
}

/// Settings shared by all suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub raw: RawParams,
    pub c7: f64,
    /// Grid spacing of the solver checks; the convergence study uses `2 dx`, `dx` and `dx / 2`.
    pub dx: f64,
    /// Solver domain is `[-half_width, half_width]`.
    pub half_width: f64,
    pub bounds_t_end: f64,
    pub speed_t_end: f64,
    pub convergence_t_end: f64,
}

impl VerifyConfig {
    pub fn new(raw: RawParams) -> Self {
        VerifyConfig {
            raw,
            c7: crate::analytic::DEFAULT_C7,
            dx: 0.01,
            half_width: 35.0,
            bounds_t_end: 0.5,
            speed_t_end: 1.0,
            convergence_t_end: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tolerance {
    AtMost { limit: f64 },
    Within { lo: f64, hi: f64 },
}

impl Tolerance {
    fn admits(self, value: f64) -> bool {
        match self {
            Tolerance::AtMost { limit } => value <= limit,
            Tolerance::Within { lo, hi } => (lo..=hi).contains(&value),
        }
    }
}

/// One verdict. Ungated checks are reported but do not affect the outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Tolerance,
    pub pass: bool,
    pub gated: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: Tolerance, gated: bool) -> Self {
        Check { name: name.into(), value, tolerance, pass: tolerance.admits(value), gated }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontSpeed {
    pub c_est: f64,
    pub relative_error: f64,
    /// Final-time `max|u - u_exact(x - c t)| / u_max`.
    pub profile_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub region: String,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub error_coarse: f64,
    pub error_fine: f64,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct VerifyReport {
    pub residual_norms: BTreeMap<String, ResidualNorms>,
    pub front_speed: Option<FrontSpeed>,
    pub bound_violations: Option<BoundReport>,
    pub convergence: Vec<ConvergenceRow>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    /// True when every gated check passes.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.gated)
    }

    fn merge(&mut self, other: VerifyReport) {
        self.residual_norms.extend(other.residual_norms);
        self.front_speed = self.front_speed.or(other.front_speed);
        self.bound_violations = self.bound_violations.take().or(other.bound_violations);
        self.convergence.extend(other.convergence);
        self.checks.extend(other.checks);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Fixed-width text table, one row per check.
    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>24}  {:>34}  {:<6}  gated", "check", "value", "tolerance", "result");
        for c in &self.checks {
            let tol = match c.tolerance {
                Tolerance::AtMost { limit } => format!("<= {limit:.6e}"),
                Tolerance::Within { lo, hi } => format!("in [{lo:.6e}, {hi:.6e}]"),
            };
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let gated = if c.gated { "yes" } else { "no" };
            let _ = writeln!(out, "{:<width$}  {:>24.16e}  {:>34}  {:<6}  {gated}", c.name, c.value, tol, verdict);
        }
        let _ = writeln!(out, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

fn closed_form_kinds() -> [ModelKind; 3] {
    [ModelKind::UnlimitedNoCrowd, ModelKind::LimitedCrowd, ModelKind::LimitedNoCrowd]
}

fn residual_section(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let n = (2.0 * RESIDUAL_HALF_WIDTH / RESIDUAL_SPACING).round() as usize + 1;
    let zeta = uniform_grid(-RESIDUAL_HALF_WIDTH, RESIDUAL_HALF_WIDTH, n);
    for kind in closed_form_kinds() {
        let params = derive_params(config.raw, kind)?;
        let form = ClosedForm::new(kind, &params, config.c7)?;
        let fd = ode_residual(&form.profile(&zeta)?)?;
        let exact = ode_residual_analytic(&form, &zeta)?;
        report.checks.push(Check::new(format!("residual/{kind}/fd"), fd.linf, Tolerance::AtMost { limit: 1e-6 }, true));
        report.checks.push(Check::new(format!("residual/{kind}/analytic"), exact.linf, Tolerance::AtMost { limit: 1e-8 }, true));
        report.residual_norms.insert(format!("{kind}/fd"), fd);
        report.residual_norms.insert(format!("{kind}/analytic"), exact);
    }

    let params = derive_params(config.raw, ModelKind::UnlimitedNoCrowd)?;
    let form = ClosedForm::new(ModelKind::UnlimitedNoCrowd, &params, config.c7)?;
    let (zeta_star, u_max) = umax_model1(&params)?;
    let reach = zeta_star.abs() + 30.0 / params.front_rate();
    let found = golden_max(|z| form.u(z), -reach, reach, 1e-10);
    let tol = Tolerance::AtMost { limit: 1e-6 };
    report.checks.push(Check::new("umax/zeta-star", (found - zeta_star).abs(), tol, true));
    report.checks.push(Check::new("umax/u-max", (form.u(found) - u_max).abs(), tol, true));

    let bound = params.curvature_bound();
    let curvature = max_ln_v_curvature(&form.profile(&zeta)?);
    report.checks.push(Check::new("curvature/ln-v", curvature, Tolerance::AtMost { limit: bound * (1.0 + 1e-3) }, true));
    Ok(report)
}

fn limit_section(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let tol = Tolerance::AtMost { limit: 1e-6 };
    for kind in closed_form_kinds() {
        let params = derive_params(config.raw, kind)?;
        let form = ClosedForm::new(kind, &params, config.c7)?;
        let lim = asymptotics(kind, &params)?;
        let (left, right) = (form.sample(-LIMIT_PROBE), form.sample(LIMIT_PROBE));
        report.checks.push(Check::new(format!("limit/{kind}/u-minus"), (left.u - lim.u_minus_inf).abs(), tol, true));
        report.checks.push(Check::new(format!("limit/{kind}/u-plus"), (right.u - lim.u_plus_inf).abs(), tol, true));
        report.checks.push(Check::new(format!("limit/{kind}/v-minus"), (left.v() - lim.v_minus_inf).abs(), tol, false));
        report.checks.push(Check::new(format!("limit/{kind}/v-plus"), (right.v() - lim.v_plus_inf).abs(), tol, false));
    }
    Ok(report)
}

fn domain(config: &VerifyConfig, dx: f64) -> Result<Grid1D> {
    Grid1D::with_spacing(-config.half_width, config.half_width, dx)
}

fn simulate(grid: &Grid1D, kind: ModelKind, params: &ModelParams, t_end: f64, snapshots: usize) -> Result<Vec<FieldState>> {
    let start = init_state(grid, kind, params, InitKind::Analytic { shift: 0.0 })?;
    run(&start, kind, params, &SolverConfig::at_cfl(grid, params, t_end, snapshots)?)
}

fn bounds_section(config: &VerifyConfig) -> Result<VerifyReport> {
    let kind = ModelKind::UnlimitedCrowd;
    let params = derive_params(config.raw, kind)?;
    if crowd_neutral(&params) {
        return Err(Error::DegenerateCrowd);
    }
    let baseline = ClosedForm::new(ModelKind::UnlimitedNoCrowd, &params, config.c7)?;
    let (fine, coarse) = rayon::join(
        || simulate(&domain(config, config.dx)?, kind, &params, config.bounds_t_end, 5),
        || simulate(&domain(config, 2.0 * config.dx)?, kind, &params, config.bounds_t_end, 5),
    );
    let bounds = check_bounds(&fine?, Some(&coarse?), &baseline, &params)?;
    let mut report = VerifyReport::default();
    let zero = Tolerance::AtMost { limit: 0.0 };
    report.checks.push(Check::new("bounds/u-violations", bounds.violations as f64, zero, true));
    report.checks.push(Check::new("bounds/v-violations", bounds.v_violations as f64, zero, false));
    report.bound_violations = Some(bounds);
    Ok(report)
}

fn speed_section(config: &VerifyConfig) -> Result<VerifyReport> {
    let kind = ModelKind::LimitedNoCrowd;
    let params = derive_params(config.raw, kind)?;
    let form = ClosedForm::new(kind, &params, config.c7)?;
    let grid = domain(config, config.dx)?;
    let traj = simulate(&grid, kind, &params, config.speed_t_end, 10)?;
    let c_est = measure_front_speed(&traj, 0.5, params.v_inf())?;
    let relative_error = (c_est - params.c()).abs() / params.c();
    let last = traj.last().expect("run returns the initial state");
    let u_max = asymptotics(kind, &params)?.u_minus_inf;
    let profile_error = last
        .u
        .iter()
        .enumerate()
        .map(|(i, u)| (u - form.u(grid.x(i) - params.c() * last.t)).abs())
        .fold(0.0, f64::max)
        / u_max;
    let mut report = VerifyReport::default();
    let tol = Tolerance::AtMost { limit: 0.02 };
    report.checks.push(Check::new("speed/front", relative_error, tol, true));
    report.checks.push(Check::new("speed/profile", profile_error, tol, true));
    report.front_speed = Some(FrontSpeed { c_est, relative_error, profile_error });
    Ok(report)
}

fn convergence_section(config: &VerifyConfig) -> Result<VerifyReport> {
    let kind = ModelKind::LimitedNoCrowd;
    let params = derive_params(config.raw, kind)?;
    let form = ClosedForm::new(kind, &params, config.c7)?;
    let spacings = [2.0 * config.dx, config.dx, 0.5 * config.dx];
    // Errors are measured inside |x| <= half_width / 2, away from the clamped ends.
    // The front is the stretch within two band widths of the half-plateau point.
    let window = 0.5 * config.half_width;
    let half_point = (params.d().ln() + config.c7.ln()) / params.front_rate();
    let front = 2.0 * params.band_width();
    let errors: Vec<[f64; 2]> = spacings
        .par_iter()
        .map(|&dx| {
            let grid = domain(config, dx)?;
            let traj = simulate(&grid, kind, &params, config.convergence_t_end, 1)?;
            let last = traj.last().expect("run returns the initial state");
            let mut err = [0.0f64; 2];
            for i in 0..grid.n {
                let x = grid.x(i);
                if x.abs() > window {
                    continue;
                }
                let zeta = x - params.c() * last.t;
                let region = usize::from((zeta - half_point).abs() <= front);
                err[region] = err[region].max((last.u[i] - form.u(zeta)).abs());
            }
            Ok(err)
        })
        .collect::<Result<_>>()?;
    let mut report = VerifyReport::default();
    for (r, region) in ["smooth", "front"].into_iter().enumerate() {
        let pairs: Vec<(f64, f64)> = spacings.iter().zip(&errors).map(|(&h, e)| (h, e[r])).collect();
        let orders = convergence_order(&pairs)?;
        for (j, order) in orders.into_iter().enumerate() {
            report.checks.push(Check::new(
                format!("convergence/{region}/{:.4}-{:.4}", pairs[j].0, pairs[j + 1].0),
                order,
                Tolerance::Within { lo: 1.75, hi: 2.25 },
                region == "smooth",
            ));
            report.convergence.push(ConvergenceRow {
                region: region.to_string(),
                h_coarse: pairs[j].0,
                h_fine: pairs[j + 1].0,
                error_coarse: pairs[j].1,
                error_fine: pairs[j + 1].1,
                order,
            });
        }
    }
    Ok(report)
}

/// Runs every check of `suite`. Sections are independent and run in parallel;
/// the report lists them in a fixed order.
pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<VerifyReport> {
    let parts = suite.parts();
    let sections: Vec<VerifyReport> = parts
        .par_iter()
        .map(|part| match part {
            Suite::Residuals => residual_section(config),
            Suite::Limits => limit_section(config),
            Suite::Bounds => bounds_section(config),
            Suite::Speed => speed_section(config),
            Suite::Convergence => convergence_section(config),
            Suite::All => unreachable!("expanded by parts"),
        })
        .collect::<Result<_>>()?;
    let mut report = VerifyReport::default();
    for s in sections {
        report.merge(s);
    }
    Ok(report)
}

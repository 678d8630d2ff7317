//! Method-of-lines finite-difference solver for the four band systems.
//!
//! The organism equation is
//!
//! ```text
//! u_t = -(beta/tau) (ln v)_x u_x + (mu/2tau) u_xx - gamma u (ln v)_xx
//! ```
//!
//! for the crowd kinds, and the conservative `-(beta/tau) (u (ln v)_x)_x +
//! (mu/2tau) u_xx` for the crowd-free kinds. The substrate has no spatial
//! operator (`v_t = -k u` or `-k u v`), so it is integrated node by node in
//! the variable `ln v`. The drift is upwinded against its local sign;
//! diffusion and `(ln v)_xx` use the centered three-point stencil. Time
//! integration is classical RK4.

use serde::{Deserialize, Serialize};

use crate::analytic::ClosedForm;
use crate::error::{Error, Result};
use crate::params::{ModelKind, ModelParams};

/// Default substrate floor, as a fraction of `v_inf`.
pub const V_FLOOR: f64 = 1e-12;

/// Diffusion stability factor: `dt <= CFL_FACTOR * dx^2 * tau / mu`.
pub const CFL_FACTOR: f64 = 0.4;

const NEGATIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidInput(format!("grid needs x_max > x_min, got [{x_min}, {x_max}]")));
        }
        if n < 16 {
            return Err(Error::InvalidInput(format!("grid needs at least 16 nodes, got {n}")));
        }
        Ok(Grid1D { x_min, x_max, n })
    }

    /// Grid on `[x_min, x_max]` with spacing as close to `dx` as an integer node count allows.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        let cells = ((x_max - x_min) / dx).round() as usize;
        Grid1D::new(x_min, x_max, cells + 1)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + self.dx() * i as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Same extent with every cell halved.
    pub fn refined(&self) -> Grid1D {
        Grid1D { n: 2 * self.n - 1, ..*self }
    }
}

/// Organism and substrate fields on a grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub grid: Grid1D,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    /// Trapezoid-rule integrals of (u, v).
    pub fn integrals(&self) -> (f64, f64) {
        (trapezoid(&self.u, self.grid.dx()), trapezoid(&self.v, self.grid.dx()))
    }
}

pub(crate) fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// The closed-form band translated by `shift` cm. The crowd-effect
    /// unlimited system is seeded with the crowd-free band of the same parameters.
    Analytic { shift: f64 },
    /// No organisms; substrate ramps from the floor to `v_inf` across `4 dx` at `x = 0`.
    Step,
    /// Gaussian organism bump of the given total mass on uniform substrate.
    GaussianBump { center: f64, width: f64, mass: f64 },
}

/// Boundary treatment. The organism density at both end nodes stays at its
/// initial value, which for analytic data is the band's asymptotic limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    ClampToAsymptote,
}

/// Order of the one-sided drift stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Upwind {
    First,
    #[default]
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub v_floor: f64,
    pub boundary: Boundary,
    pub snapshot_every: usize,
    pub upwind: Upwind,
}

/// Largest stable time step for `grid`.
pub fn cfl_limit(grid: &Grid1D, params: &ModelParams) -> f64 {
    CFL_FACTOR * grid.dx().powi(2) * params.tau() / params.mu()
}

impl SolverConfig {
    pub fn new(grid: &Grid1D, params: &ModelParams, dt: f64, t_end: f64, snapshot_every: usize) -> Result<Self> {
        let limit = cfl_limit(grid, params);
        if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::CflViolation { dt, limit });
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::InvalidInput(format!("t_end must be finite and non-negative, got {t_end}")));
        }
        if snapshot_every == 0 {
            return Err(Error::InvalidInput("snapshot_every must be positive".into()));
        }
        Ok(SolverConfig {
            dt,
            t_end,
            v_floor: V_FLOOR,
            boundary: Boundary::ClampToAsymptote,
            snapshot_every,
            upwind: Upwind::default(),
        })
    }

    /// Largest stable step that divides `[0, t_end]` into a whole number of
    /// steps per snapshot, producing `snapshots` snapshots after the initial one.
    pub fn at_cfl(grid: &Grid1D, params: &ModelParams, t_end: f64, snapshots: usize) -> Result<Self> {
        let snapshots = snapshots.max(1);
        let limit = cfl_limit(grid, params);
        if t_end <= 0.0 {
            return SolverConfig::new(grid, params, limit, 0.0, 1);
        }
        let per_snapshot = (t_end / (limit * snapshots as f64)).ceil().max(1.0) as usize;
        let dt = t_end / (per_snapshot * snapshots) as f64;
        SolverConfig::new(grid, params, dt, t_end, per_snapshot)
    }

    pub fn with_upwind(mut self, upwind: Upwind) -> Self {
        self.upwind = upwind;
        self
    }

    pub fn steps(&self) -> usize {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil() as usize
        }
    }
}

/// Builds the initial fields on `grid`.
pub fn init_state(grid: &Grid1D, kind: ModelKind, params: &ModelParams, init: InitKind) -> Result<FieldState> {
    let dx = grid.dx();
    let nodes_per_band = params.band_width() / dx;
    if nodes_per_band < 8.0 {
        return Err(Error::GridTooCoarse { nodes: nodes_per_band });
    }
    let x = grid.nodes();
    let v_inf = params.v_inf();
    let floor = V_FLOOR * v_inf;
    let (u, v): (Vec<f64>, Vec<f64>) = match init {
        InitKind::Analytic { shift } => {
            let form_kind = if kind == ModelKind::UnlimitedCrowd { ModelKind::UnlimitedNoCrowd } else { kind };
            let form = ClosedForm::new(form_kind, params, 1.0)?;
            x.iter()
                .map(|&xi| {
                    let s = form.sample(xi - shift);
                    (s.u, s.v().max(floor))
                })
                .unzip()
        }
        InitKind::Step => x
            .iter()
            .map(|&xi| (0.0, (v_inf * ((xi + 2.0 * dx) / (4.0 * dx)).clamp(0.0, 1.0)).max(floor)))
            .unzip(),
        InitKind::GaussianBump { center, width, mass } => {
            if !(width > 0.0 && mass >= 0.0) {
                return Err(Error::InvalidInput("bump needs width > 0 and mass >= 0".into()));
            }
            let raw: Vec<f64> = x.iter().map(|&xi| (-0.5 * ((xi - center) / width).powi(2)).exp()).collect();
            let total = trapezoid(&raw, dx);
            if total <= 0.0 {
                return Err(Error::InvalidInput("bump lies outside the grid".into()));
            }
            raw.iter().map(|r| (r * mass / total, v_inf)).unzip()
        }
    };
    Ok(FieldState { grid: *grid, t: 0.0, u, v })
}

/// Right-hand side of the semi-discrete system in the variables (u, ln v).
struct Rhs {
    drift: f64,
    diffusion: f64,
    crowd: f64,
    conservative: bool,
    limited: bool,
    k: f64,
    upwind: Upwind,
    inv_dx: f64,
    inv_dx2: f64,
}

impl Rhs {
    fn new(kind: ModelKind, params: &ModelParams, grid: &Grid1D, upwind: Upwind) -> Self {
        let dx = grid.dx();
        Rhs {
            drift: params.beta() / params.tau(),
            diffusion: params.mu() / (2.0 * params.tau()),
            crowd: params.effective_gamma(kind),
            conservative: !kind.has_crowd_term(),
            limited: kind.limited_substrate(),
            k: params.k(),
            upwind,
            inv_dx: 1.0 / dx,
            inv_dx2: 1.0 / (dx * dx),
        }
    }

    fn eval(&self, u: &[f64], w: &[f64], du: &mut [f64], dw: &mut [f64], flux: &mut [f64]) {
        let n = u.len();
        if self.limited {
            for i in 0..n {
                dw[i] = -self.k * u[i];
            }
        } else {
            for i in 0..n {
                dw[i] = -self.k * u[i] * (-w[i]).exp();
            }
        }
        du[0] = 0.0;
        du[n - 1] = 0.0;
        let second = self.upwind == Upwind::Second;
        if self.conservative {
            // flux[j] sits on the face between nodes j and j+1
            let face_flux = |j: usize, left: f64, right: f64| {
                let a = self.drift * (w[j + 1] - w[j]) * self.inv_dx;
                a.max(0.0) * left + a.min(0.0) * right
            };
            flux[0] = face_flux(0, u[0], if second && n > 2 { 1.5 * u[1] - 0.5 * u[2] } else { u[1] });
            flux[n - 2] = face_flux(n - 2, if second && n > 2 { 1.5 * u[n - 2] - 0.5 * u[n - 3] } else { u[n - 2] }, u[n - 1]);
            if second {
                for j in 1..n - 2 {
                    flux[j] = face_flux(j, 1.5 * u[j] - 0.5 * u[j - 1], 1.5 * u[j + 1] - 0.5 * u[j + 2]);
                }
            } else {
                for j in 1..n - 2 {
                    flux[j] = face_flux(j, u[j], u[j + 1]);
                }
            }
            for i in 1..n - 1 {
                let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * self.inv_dx2;
                du[i] = -(flux[i] - flux[i - 1]) * self.inv_dx + self.diffusion * lap;
            }
        } else {
            let node = |i: usize, back: f64, fwd: f64| {
                let a = self.drift * (w[i + 1] - w[i - 1]) * 0.5 * self.inv_dx;
                let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * self.inv_dx2;
                let curv = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * self.inv_dx2;
                -(a.max(0.0) * back + a.min(0.0) * fwd) + self.diffusion * lap - self.crowd * u[i] * curv
            };
            let first_back = |i: usize| (u[i] - u[i - 1]) * self.inv_dx;
            let first_fwd = |i: usize| (u[i + 1] - u[i]) * self.inv_dx;
            if second && n > 4 {
                du[1] = node(1, first_back(1), (-1.5 * u[1] + 2.0 * u[2] - 0.5 * u[3]) * self.inv_dx);
                du[n - 2] = node(n - 2, (1.5 * u[n - 2] - 2.0 * u[n - 3] + 0.5 * u[n - 4]) * self.inv_dx, first_fwd(n - 2));
                for i in 2..n - 2 {
                    let back = (1.5 * u[i] - 2.0 * u[i - 1] + 0.5 * u[i - 2]) * self.inv_dx;
                    let fwd = (-1.5 * u[i] + 2.0 * u[i + 1] - 0.5 * u[i + 2]) * self.inv_dx;
                    du[i] = node(i, back, fwd);
                }
            } else {
                for i in 1..n - 1 {
                    du[i] = node(i, first_back(i), first_fwd(i));
                }
            }
        }
    }
}

/// Reusable RK4 integrator state.
struct Integrator {
    rhs: Rhs,
    dt: f64,
    w_floor: f64,
    u: Vec<f64>,
    w: Vec<f64>,
    stage_u: Vec<f64>,
    stage_w: Vec<f64>,
    ku: [Vec<f64>; 4],
    kw: [Vec<f64>; 4],
    flux: Vec<f64>,
}

impl Integrator {
    fn new(state: &FieldState, kind: ModelKind, params: &ModelParams, config: &SolverConfig) -> Self {
        let n = state.u.len();
        let w_floor = (config.v_floor * params.v_inf()).ln();
        Integrator {
            rhs: Rhs::new(kind, params, &state.grid, config.upwind),
            dt: config.dt,
            w_floor,
            u: state.u.clone(),
            w: state.v.iter().map(|v| v.ln().max(w_floor)).collect(),
            stage_u: vec![0.0; n],
            stage_w: vec![0.0; n],
            ku: std::array::from_fn(|_| vec![0.0; n]),
            kw: std::array::from_fn(|_| vec![0.0; n]),
            flux: vec![0.0; n],
        }
    }

    fn advance(&mut self, t_after: f64) -> Result<()> {
        let dt = self.dt;
        let w_floor = self.w_floor;
        let Integrator { rhs, u, w, stage_u, stage_w, ku, kw, flux, .. } = self;
        let [k1, k2, k3, k4] = ku;
        let [l1, l2, l3, l4] = kw;
        rhs.eval(u, w, k1, l1, flux);
        offset(stage_u, u, 0.5 * dt, k1);
        offset(stage_w, w, 0.5 * dt, l1);
        rhs.eval(stage_u, stage_w, k2, l2, flux);
        offset(stage_u, u, 0.5 * dt, k2);
        offset(stage_w, w, 0.5 * dt, l2);
        rhs.eval(stage_u, stage_w, k3, l3, flux);
        offset(stage_u, u, dt, k3);
        offset(stage_w, w, dt, l3);
        rhs.eval(stage_u, stage_w, k4, l4, flux);

        let sixth = dt / 6.0;
        let mut u_max = 0.0f64;
        let mut u_min = 0.0f64;
        let mut finite = true;
        for i in 0..u.len() {
            u[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            w[i] = (w[i] + sixth * (l1[i] + 2.0 * l2[i] + 2.0 * l3[i] + l4[i])).max(w_floor);
            finite &= u[i].is_finite() && w[i].is_finite();
            u_max = u_max.max(u[i]);
            u_min = u_min.min(u[i]);
        }
        if !finite {
            return Err(Error::StabilityViolation { t: t_after });
        }
        if u_min < -NEGATIVITY_TOL * u_max {
            return Err(Error::NegativityBreach { t: t_after, min: u_min });
        }
        Ok(())
    }

    fn state(&self, grid: Grid1D, t: f64) -> FieldState {
        FieldState { grid, t, u: self.u.clone(), v: self.w.iter().map(|w| w.exp()).collect() }
    }
}

fn offset(out: &mut [f64], base: &[f64], h: f64, slope: &[f64]) {
    for ((o, b), s) in out.iter_mut().zip(base).zip(slope) {
        *o = b + h * s;
    }
}

fn check_state(state: &FieldState) -> Result<()> {
    if state.u.len() != state.grid.n || state.v.len() != state.grid.n {
        return Err(Error::InvalidInput("field length does not match the grid".into()));
    }
    if state.u.iter().chain(&state.v).any(|x| !x.is_finite()) || state.v.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput("fields must be finite with v > 0".into()));
    }
    Ok(())
}

/// Advances `state` by one time step.
pub fn step(state: &FieldState, kind: ModelKind, params: &ModelParams, config: &SolverConfig) -> Result<FieldState> {
    check_state(state)?;
    let mut integ = Integrator::new(state, kind, params, config);
    let t = state.t + config.dt;
    integ.advance(t)?;
    Ok(integ.state(state.grid, t))
}

/// Integrates to `t_end`, returning the initial state and every
/// `snapshot_every`-th state, plus the final state.
pub fn run(state: &FieldState, kind: ModelKind, params: &ModelParams, config: &SolverConfig) -> Result<Vec<FieldState>> {
    check_state(state)?;
    let steps = config.steps();
    let mut integ = Integrator::new(state, kind, params, config);
    let mut out = vec![state.clone()];
    for i in 1..=steps {
        let t = state.t + config.dt * i as f64;
        integ.advance(t)?;
        if i % config.snapshot_every == 0 || i == steps {
            out.push(integ.state(state.grid, t));
        }
    }
    Ok(out)
}

/// Position where `v` first crosses `level * v_inf`, linearly interpolated.
pub fn level_crossing(state: &FieldState, level_value: f64) -> Option<f64> {
    let v = &state.v;
    (0..v.len() - 1).find_map(|i| {
        let (a, b) = (v[i] - level_value, v[i + 1] - level_value);
        if a == 0.0 {
            Some(state.grid.x(i))
        } else if a * b < 0.0 || (b == 0.0 && a != 0.0) {
            let frac = a / (a - b);
            Some(state.grid.x(i) + frac * state.grid.dx())
        } else {
            None
        }
    })
}

/// Least-squares slope of the substrate level crossing against time.
pub fn measure_front_speed(snapshots: &[FieldState], level: f64, v_inf: f64) -> Result<f64> {
    if snapshots.len() < 3 {
        return Err(Error::DegenerateInput(format!("front speed needs >= 3 snapshots, got {}", snapshots.len())));
    }
    let target = level * v_inf;
    let pos = snapshots
        .iter()
        .enumerate()
        .map(|(index, s)| level_crossing(s, target).ok_or(Error::NoCrossing { index }))
        .collect::<Result<Vec<f64>>>()?;
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    least_squares_slope(&times, &pos)
}

pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateInput("snapshot times do not vary".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

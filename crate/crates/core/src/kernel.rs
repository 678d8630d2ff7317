//! Direct integration of the jump law
//!
//! ```text
//! u(x, t + tau) = sum_j u(x + j dx, t) phi_x(j dx) dx + tau f_u(x, t)
//! ```
//!
//! with a Gaussian jump density whose mean is `-beta (ln v)_x` at the
//! receiving node and whose variance is `mu`. The quorum source is
//! `f_u = -gamma u (ln v)_xx`, frozen over the collision interval. Derivatives
//! of `ln v` are taken on a stencil as wide as the jump standard deviation. The
//! substrate only loses mass to consumption.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{derive_params, ModelKind, ModelParams, RawParams};
use crate::pde::{FieldState, Grid1D, V_FLOOR};

/// Minimum resolution of the jump standard deviation, in grid cells.
pub const MIN_SIGMA_CELLS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Truncation radius in units of the jump standard deviation.
    pub truncation: f64,
    pub v_floor: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { family: KernelFamily::Gaussian, truncation: 6.0, v_floor: V_FLOOR }
    }
}

/// Discrete jump density for one receiving node. Weight `j` belongs to the
/// jump `(first + j) * dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeKernel {
    pub first: isize,
    pub weights: Vec<f64>,
    /// Target mean jump `-beta (ln v)_x`, cm.
    pub mean: f64,
    /// Quadrature mass discarded by truncation before renormalization.
    pub discarded: f64,
}

impl NodeKernel {
    /// First moment and second central moment of the discrete density.
    pub fn moments(&self, dx: f64) -> (f64, f64) {
        let jump = |j: usize| (self.first + j as isize) as f64 * dx;
        let mean: f64 = self.weights.iter().enumerate().map(|(j, w)| w * jump(j)).sum();
        let var = self.weights.iter().enumerate().map(|(j, w)| w * (jump(j) - mean).powi(2)).sum();
        (mean, var)
    }
}

/// Slope and curvature of `ln v` on a stencil of `m` cells. Using the kernel
/// width rather than one cell keeps grid-scale substrate ripples from being
/// amplified by `1/dx^2` in the quorum source. Nodes closer than `m` cells to
/// an end reuse the nearest full stencil.
fn ln_v_derivatives(ln_v: &[f64], dx: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let n = ln_v.len();
    let m = m.clamp(1, (n - 1) / 2);
    let h = m as f64 * dx;
    let mut slope = vec![0.0; n];
    let mut curv = vec![0.0; n];
    for i in 0..n {
        let c = i.clamp(m, n - 1 - m);
        let k = (ln_v[c + m] - 2.0 * ln_v[c] + ln_v[c - m]) / (h * h);
        let g = (ln_v[c + m] - ln_v[c - m]) / (2.0 * h);
        curv[i] = k;
        slope[i] = g + k * (i as f64 - c as f64) * dx;
    }
    (slope, curv)
}

fn stencil_cells(sigma: f64, dx: f64) -> usize {
    (sigma / dx).round().max(1.0) as usize
}

fn check_spec(spec: &KernelSpec, grid: &Grid1D, params: &ModelParams) -> Result<f64> {
    if spec.truncation < 4.0 {
        return Err(Error::InvalidInput(format!("kernel truncation must be >= 4 sigma, got {}", spec.truncation)));
    }
    let sigma = params.mu().sqrt();
    let limit = MIN_SIGMA_CELLS * grid.dx();
    if sigma < limit {
        return Err(Error::ResolutionError { sigma, limit });
    }
    Ok(sigma)
}

fn gaussian_kernel(mean: f64, sigma: f64, radius: f64, dx: f64) -> NodeKernel {
    let first = ((mean - radius) / dx).ceil() as isize;
    let last = ((mean + radius) / dx).floor() as isize;
    let norm = dx / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let inv_two_var = 0.5 / (sigma * sigma);
    let mut weights: Vec<f64> = (first..=last)
        .map(|j| {
            let r = j as f64 * dx - mean;
            norm * (-r * r * inv_two_var).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    NodeKernel { first, weights, mean, discarded: 1.0 - total }
}

/// Per-node jump densities for the current substrate field.
pub fn build_kernel(state: &FieldState, params: &ModelParams, spec: &KernelSpec) -> Result<Vec<NodeKernel>> {
    let dx = state.grid.dx();
    let sigma = check_spec(spec, &state.grid, params)?;
    if state.v.iter().any(|&v| v.is_nan() || v < spec.v_floor * params.v_inf()) {
        return Err(Error::InvalidInput("substrate below the floor".into()));
    }
    let ln_v: Vec<f64> = state.v.iter().map(|v| v.ln()).collect();
    let (slope, _) = ln_v_derivatives(&ln_v, dx, stencil_cells(sigma, dx));
    let radius = spec.truncation * sigma;
    Ok(slope.iter().map(|g| gaussian_kernel(-params.beta() * g, sigma, radius, dx)).collect())
}

/// Advances by one collision interval `tau`.
pub fn kernel_step(state: &FieldState, params: &ModelParams, spec: &KernelSpec, kind: ModelKind) -> Result<FieldState> {
    let n = state.grid.n;
    let dx = state.grid.dx();
    let tau = params.tau();
    let kernels = build_kernel(state, params, spec)?;
    let ln_v: Vec<f64> = state.v.iter().map(|v| v.ln()).collect();
    let (_, curv) = ln_v_derivatives(&ln_v, dx, stencil_cells(params.mu().sqrt(), dx));
    let gamma = params.effective_gamma(kind);
    let u = &state.u;
    let last = n as isize - 1;

    let mut u_new = vec![0.0; n];
    u_new[0] = u[0];
    u_new[n - 1] = u[n - 1];
    for i in 1..n - 1 {
        let kern = &kernels[i];
        let start = i as isize + kern.first;
        let gathered: f64 = kern
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * u[(start + j as isize).clamp(0, last) as usize])
            .sum();
        u_new[i] = gathered - tau * gamma * u[i] * curv[i];
    }

    let floor = spec.v_floor * params.v_inf();
    let k = params.k();
    let v_new: Vec<f64> = state
        .v
        .iter()
        .zip(u)
        .map(|(&v, &u)| {
            let consumed = if kind.limited_substrate() { k * u * v } else { k * u };
            (v - tau * consumed).max(floor)
        })
        .collect();

    let t = state.t + tau;
    let u_max = u_new.iter().cloned().fold(0.0, f64::max);
    let u_min = u_new.iter().cloned().fold(0.0, f64::min);
    if u_new.iter().any(|x| !x.is_finite()) {
        return Err(Error::StabilityViolation { t });
    }
    if u_min < -1e-10 * u_max {
        return Err(Error::NegativityBreach { t, min: u_min });
    }
    Ok(FieldState { grid: state.grid, t, u: u_new, v: v_new })
}

/// Repeated kernel steps up to `t_end`; one snapshot per collision interval,
/// so `floor(t_end / tau) + 1` states including the initial one.
pub fn run_kernel(
    state: &FieldState,
    params: &ModelParams,
    spec: &KernelSpec,
    kind: ModelKind,
    t_end: f64,
) -> Result<Vec<FieldState>> {
    let steps = (t_end / params.tau() + 1e-9).floor().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for _ in 0..steps {
        let next = kernel_step(out.last().unwrap(), params, spec, kind)?;
        out.push(next);
    }
    Ok(out)
}

/// Parameters with the collision interval divided by `factor` while drift and
/// jump variance per unit time stay fixed: tau, beta and mu shrink together
/// and gamma0 grows so that gamma = beta gamma0 is unchanged.
pub fn refine_interval(params: &ModelParams, kind: ModelKind, factor: f64) -> Result<ModelParams> {
    let raw = params.raw();
    derive_params(
        RawParams {
            tau: raw.tau / factor,
            mu: raw.mu / factor,
            beta: raw.beta / factor,
            gamma0: raw.gamma0 * factor,
            ..raw
        },
        kind,
    )
}

/// u and v differences between two trajectories at one shared time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub t: f64,
    pub u_linf: f64,
    pub u_l2: f64,
    pub v_linf: f64,
    pub v_l2: f64,
}

/// Norms of the differences at every time present in both trajectories.
pub fn compare_to_pde(kernel_traj: &[FieldState], pde_traj: &[FieldState]) -> Result<Vec<Discrepancy>> {
    let grid = match (kernel_traj.first(), pde_traj.first()) {
        (Some(a), Some(b)) if a.grid == b.grid => a.grid,
        _ => return Err(Error::GridMismatch),
    };
    if kernel_traj.iter().chain(pde_traj).any(|s| s.grid != grid) {
        return Err(Error::GridMismatch);
    }
    let dx = grid.dx();
    let rows: Vec<Discrepancy> = kernel_traj
        .iter()
        .filter_map(|a| {
            let b = pde_traj.iter().find(|b| (a.t - b.t).abs() <= 1e-9 * a.t.abs().max(1.0))?;
            let norms = |x: &[f64], y: &[f64]| {
                let diff = x.iter().zip(y).map(|(p, q)| (p - q).abs());
                let linf = diff.clone().fold(0.0, f64::max);
                let l2 = (diff.map(|d| d * d).sum::<f64>() * dx).sqrt();
                (linf, l2)
            };
            let (u_linf, u_l2) = norms(&a.u, &b.u);
            let (v_linf, v_l2) = norms(&a.v, &b.v);
            Some(Discrepancy { t: a.t, u_linf, u_l2, v_linf, v_l2 })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::GridMismatch);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::pde::{init_state, InitKind};

    fn params(kind: ModelKind) -> ModelParams {
        derive_params(RawParams::table_default(), kind).unwrap()
    }

    fn uniform(grid: Grid1D, u: Vec<f64>) -> FieldState {
        FieldState { grid, t: 0.0, v: vec![1.0; grid.n], u }
    }

    #[test]
    fn constant_substrate_gives_centered_kernels() {
        let p = params(ModelKind::LimitedCrowd);
        let g = Grid1D::with_spacing(-10.0, 10.0, 0.05).unwrap();
        let s = uniform(g, vec![0.0; g.n]);
        for k in build_kernel(&s, &p, &KernelSpec::default()).unwrap() {
            let (m, var) = k.moments(g.dx());
            assert!(m.abs() < 1e-12);
            assert!((var - p.mu()).abs() < 1e-4 * p.mu());
            assert!((k.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(k.weights.iter().all(|&w| w >= 0.0));
            assert!(k.discarded >= 0.0 && k.discarded < 1e-8);
        }
    }

    #[test]
    fn drift_sets_the_mean_jump() {
        // ln v linear with slope g: every node must have mean -beta g.
        let p = params(ModelKind::LimitedCrowd);
        let g = Grid1D::with_spacing(-10.0, 10.0, 0.05).unwrap();
        let slope = 0.37;
        let v = g.nodes().iter().map(|x| (slope * (x - 10.0)).exp()).collect();
        let s = FieldState { grid: g, t: 0.0, u: vec![0.0; g.n], v };
        for k in build_kernel(&s, &p, &KernelSpec::default()).unwrap() {
            let (m, var) = k.moments(g.dx());
            assert!((k.mean + 0.25 * slope).abs() < 1e-12);
            assert!((m - k.mean).abs() < 1e-6, "mean {m} target {}", k.mean);
            assert!((var - p.mu()).abs() < 1e-4 * p.mu());
        }
    }

    #[test]
    fn unresolved_kernel_is_rejected() {
        let p = derive_params(RawParams { mu: 0.0004, beta: 0.001, ..RawParams::table_default() }, ModelKind::LimitedCrowd)
            .unwrap();
        let g = Grid1D::with_spacing(-1.0, 1.0, 0.01).unwrap();
        let s = uniform(g, vec![0.0; g.n]);
        assert!(matches!(build_kernel(&s, &p, &KernelSpec::default()), Err(Error::ResolutionError { .. })));
        let spec = KernelSpec { truncation: 3.0, ..KernelSpec::default() };
        let p = params(ModelKind::LimitedCrowd);
        assert!(build_kernel(&s, &p, &spec).is_err());
    }

    #[test]
    fn zero_organisms_are_a_fixed_point() {
        let p = params(ModelKind::LimitedCrowd);
        let g = Grid1D::with_spacing(-20.0, 20.0, 0.05).unwrap();
        let mut s = init_state(&g, ModelKind::LimitedCrowd, &p, InitKind::Analytic { shift: 0.0 }).unwrap();
        s.u.iter_mut().for_each(|u| *u = 0.0);
        let next = kernel_step(&s, &p, &KernelSpec::default(), ModelKind::LimitedCrowd).unwrap();
        assert_eq!(next.u, s.u);
        assert_eq!(next.v, s.v);
        assert_relative_eq!(next.t, 0.05);
    }

    #[test]
    fn bump_variance_grows_by_mu_per_step() {
        // Moment bookkeeping: convolving with a zero-mean density of variance mu
        // adds exactly mu to the variance and keeps mass and mean. Consumption
        // is switched off so the substrate stays uniform.
        let p = derive_params(RawParams { k: 1e-30, ..RawParams::table_default() }, ModelKind::LimitedCrowd).unwrap();
        let g = Grid1D::with_spacing(-15.0, 15.0, 0.02).unwrap();
        let s = init_state(&g, ModelKind::LimitedCrowd, &p, InitKind::GaussianBump { center: 0.4, width: 0.6, mass: 1.0 }).unwrap();
        let moments = |s: &FieldState| {
            let x = g.nodes();
            let m0: f64 = s.u.iter().sum();
            let m1: f64 = s.u.iter().zip(&x).map(|(u, x)| u * x).sum::<f64>() / m0;
            let m2: f64 = s.u.iter().zip(&x).map(|(u, x)| u * (x - m1).powi(2)).sum::<f64>() / m0;
            (m0, m1, m2)
        };
        let spec = KernelSpec::default();
        let mut cur = s;
        for _ in 0..3 {
            let next = kernel_step(&cur, &p, &spec, ModelKind::LimitedCrowd).unwrap();
            let (a0, a1, a2) = moments(&cur);
            let (b0, b1, b2) = moments(&next);
            assert!((b0 - a0).abs() < 1e-8 * a0, "mass {a0} -> {b0}");
            assert!((b1 - a1).abs() < 1e-9);
            assert!((b2 - a2 - p.mu()).abs() < 1e-6, "variance gain {}", b2 - a2);
            cur = next;
        }
    }

    #[test]
    fn pure_convolution_conserves_mass_under_uniform_drift() {
        let p = params(ModelKind::LimitedCrowd);
        let g = Grid1D::with_spacing(-15.0, 15.0, 0.02).unwrap();
        let v = g.nodes().iter().map(|x| (0.2 * (x - 15.0)).exp()).collect();
        let u = g.nodes().iter().map(|x| (-x * x).exp()).collect::<Vec<_>>();
        let s = FieldState { grid: g, t: 0.0, u, v };
        // ln v is linear so (ln v)_xx = 0 and the quorum source vanishes
        let next = kernel_step(&s, &p, &KernelSpec::default(), ModelKind::LimitedCrowd).unwrap();
        let (m0, m1) = (s.u.iter().sum::<f64>(), next.u.iter().sum::<f64>());
        assert!((m1 - m0).abs() < 1e-8 * m0);
    }

    #[test]
    fn reflection_symmetry_without_net_drift() {
        // Reflection-symmetric substrate: the update must commute with x -> -x.
        let p = params(ModelKind::LimitedNoCrowd);
        let g = Grid1D::with_spacing(-12.0, 12.0, 0.05).unwrap();
        let x = g.nodes();
        let v: Vec<f64> = x.iter().map(|x| 1.0 / (1.0 + 0.3 * x * x).sqrt()).collect();
        let u: Vec<f64> = x.iter().map(|x| (-(x - 1.5) * (x - 1.5)).exp() + 0.5 * (-(x + 4.0).powi(2)).exp()).collect();
        let s = FieldState { grid: g, t: 0.0, u: u.clone(), v: v.clone() };
        let r = FieldState { grid: g, t: 0.0, u: u.iter().rev().cloned().collect(), v: v.iter().rev().cloned().collect() };
        let spec = KernelSpec::default();
        let a = kernel_step(&s, &p, &spec, ModelKind::LimitedNoCrowd).unwrap();
        let b = kernel_step(&r, &p, &spec, ModelKind::LimitedNoCrowd).unwrap();
        for i in 0..g.n {
            assert!((a.u[i] - b.u[g.n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn substrate_ripple_does_not_grow() {
        // A grid-scale ripple in v must stay bounded over many short intervals.
        let kind = ModelKind::LimitedNoCrowd;
        let q = refine_interval(&params(kind), kind, 8.0).unwrap();
        let g = Grid1D::with_spacing(-10.0, 10.0, 0.01).unwrap();
        let mut s = init_state(&g, kind, &q, InitKind::Analytic { shift: 0.0 }).unwrap();
        for (i, v) in s.v.iter_mut().enumerate() {
            *v *= 1.0 + 1e-6 * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let traj = run_kernel(&s, &q, &KernelSpec::default(), kind, 0.25).unwrap();
        let end = traj.last().unwrap();
        let ripple = (2..g.n - 2)
            .map(|i| (end.u[i + 1] - 2.0 * end.u[i] + end.u[i - 1]).abs())
            .fold(0.0, f64::max);
        assert!(ripple < 1e-4, "ripple {ripple}");
    }

    #[test]
    fn snapshot_count_follows_tau() {
        let p = params(ModelKind::LimitedNoCrowd);
        let g = Grid1D::with_spacing(-20.0, 20.0, 0.05).unwrap();
        let s = init_state(&g, ModelKind::LimitedNoCrowd, &p, InitKind::Analytic { shift: 0.0 }).unwrap();
        let traj = run_kernel(&s, &p, &KernelSpec::default(), ModelKind::LimitedNoCrowd, 0.27).unwrap();
        assert_eq!(traj.len(), 6);
        let traj = run_kernel(&s, &p, &KernelSpec::default(), ModelKind::LimitedNoCrowd, 0.25).unwrap();
        assert_eq!(traj.len(), 6);
    }

    #[test]
    fn refined_interval_keeps_rates() {
        let p = params(ModelKind::LimitedCrowd);
        let q = refine_interval(&p, ModelKind::LimitedCrowd, 4.0).unwrap();
        assert_relative_eq!(q.beta() / q.tau(), p.beta() / p.tau(), max_relative = 1e-14);
        assert_relative_eq!(q.mu() / q.tau(), p.mu() / p.tau(), max_relative = 1e-14);
        assert_relative_eq!(q.gamma(), p.gamma(), max_relative = 1e-14);
        assert_relative_eq!(q.d(), p.d(), max_relative = 1e-14);
        assert_relative_eq!(q.front_rate(), p.front_rate(), max_relative = 1e-14);
    }

    #[test]
    fn comparison_norms() {
        let p = params(ModelKind::LimitedNoCrowd);
        let g = Grid1D::with_spacing(-20.0, 20.0, 0.05).unwrap();
        let s = init_state(&g, ModelKind::LimitedNoCrowd, &p, InitKind::Analytic { shift: 0.0 }).unwrap();
        let rows = compare_to_pde(std::slice::from_ref(&s), std::slice::from_ref(&s)).unwrap();
        assert_eq!(rows, vec![Discrepancy { t: 0.0, u_linf: 0.0, u_l2: 0.0, v_linf: 0.0, v_l2: 0.0 }]);
        let other = FieldState { grid: Grid1D::with_spacing(-20.0, 20.0, 0.1).unwrap(), ..s.clone() };
        assert!(matches!(compare_to_pde(std::slice::from_ref(&s), &[other]), Err(Error::GridMismatch)));
        let later = FieldState { t: 1.0, ..s.clone() };
        assert!(matches!(compare_to_pde(&[s], &[later]), Err(Error::GridMismatch)));
    }
}

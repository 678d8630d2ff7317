//! Closed-form traveling-band profiles in the moving coordinate `zeta = x - c t`.
//!
//! All three closed forms are logistic in `L = const - s*zeta` with
//! `s = 2 tau c / mu`, so they are evaluated through `softplus` and the
//! logistic function. Nothing overflows for large |zeta|; the profiles settle
//! on their asymptotic limits instead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{crowd_neutral, ModelKind, ModelParams};

/// Default translation constant for the limited-substrate crowd band.
pub const DEFAULT_C7: f64 = 1.0;

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Values and derivatives of a closed-form band at one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    pub ln_v: f64,
    pub dln_v: f64,
    pub d2ln_v: f64,
}

impl WaveSample {
    pub fn v(&self) -> f64 {
        self.ln_v.exp()
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    // u = amplitude * (1+e)^{-d/(d-1)} * e, e = exp(-s zeta); v = v_inf (1+e)^{-1/(d-1)}
    Unlimited { amplitude: f64, d: f64 },
    // u = plateau * logistic(L); ln v = ln v_inf - exponent * softplus(L); L = offset - s zeta
    Logistic { plateau: f64, offset: f64, exponent: f64 },
}

/// A closed-form traveling band that can be sampled pointwise.
#[derive(Debug, Clone, Copy)]
pub struct ClosedForm {
    kind: ModelKind,
    params: ModelParams,
    rate: f64,
    ln_v_inf: f64,
    shape: Shape,
}

impl ClosedForm {
    /// Builds the closed form for `kind`. `c7` only affects `LimitedCrowd`.
    ///
    /// `UnlimitedCrowd` has no closed form and is rejected.
    pub fn new(kind: ModelKind, params: &ModelParams, c7: f64) -> Result<Self> {
        let shape = match kind {
            ModelKind::UnlimitedNoCrowd => {
                let d = params.d();
                if d <= 1.0 {
                    return Err(Error::ConstraintViolation { d });
                }
                Shape::Unlimited { amplitude: params.scale_q() / (d - 1.0), d }
            }
            ModelKind::LimitedCrowd => {
                if !(c7.is_finite() && c7 > 0.0) {
                    return Err(Error::NonPositiveParameter { name: "c7", value: c7 });
                }
                let drive = params.beta() + params.gamma() * params.tau();
                let c = params.c();
                Shape::Logistic {
                    plateau: 2.0 * params.tau() * c * c / (params.k() * drive),
                    offset: c7.ln(),
                    exponent: params.mu() / drive,
                }
            }
            ModelKind::LimitedNoCrowd => {
                let d = params.d();
                Shape::Logistic {
                    plateau: params.scale_q2() / d,
                    offset: d.ln(),
                    exponent: 1.0 / d,
                }
            }
            ModelKind::UnlimitedCrowd => return Err(Error::Unsupported(kind)),
        };
        Ok(ClosedForm { kind, params: *params, rate: params.front_rate(), ln_v_inf: params.v_inf().ln(), shape })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn sample(&self, zeta: f64) -> WaveSample {
        let s = self.rate;
        match self.shape {
            Shape::Unlimited { amplitude, d } => {
                let arg = -s * zeta;
                let sp = softplus(arg);
                let p = logistic(arg);
                let q = logistic(-arg);
                let ratio = d / (d - 1.0);
                let ln_v = self.ln_v_inf - sp / (d - 1.0);
                let dln_v = s * p / (d - 1.0);
                let d2ln_v = -s * s * p * q / (d - 1.0);
                let u = (amplitude.ln() - ratio * sp + arg).exp();
                let g = s * (ratio * p - 1.0);
                let dg = -ratio * s * s * p * q;
                let du = u * g;
                WaveSample { u, du, d2u: du * g + u * dg, ln_v, dln_v, d2ln_v }
            }
            Shape::Logistic { plateau, offset, exponent } => {
                let arg = offset - s * zeta;
                let p = logistic(arg);
                let q = logistic(-arg);
                let dp = -s * p * q;
                let d2p = -s * (q - p) * dp;
                WaveSample {
                    u: plateau * p,
                    du: plateau * dp,
                    d2u: plateau * d2p,
                    ln_v: self.ln_v_inf - exponent * softplus(arg),
                    dln_v: exponent * s * p,
                    d2ln_v: exponent * s * dp,
                }
            }
        }
    }

    pub fn u(&self, zeta: f64) -> f64 {
        self.sample(zeta).u
    }

    pub fn v(&self, zeta: f64) -> f64 {
        self.sample(zeta).v()
    }

    /// Samples the band on `zeta`, which must be strictly increasing with at least two points.
    pub fn profile(&self, zeta: &[f64]) -> Result<Profile> {
        check_zeta(zeta)?;
        let (u, v) = zeta.iter().map(|&z| {
            let s = self.sample(z);
            (s.u, s.v())
        }).unzip();
        Ok(Profile { zeta: zeta.to_vec(), u, v, params: self.params, kind: self.kind })
    }
}

fn check_zeta(zeta: &[f64]) -> Result<()> {
    if zeta.len() < 2 {
        return Err(Error::InvalidInput("profile needs at least two coordinates".into()));
    }
    if zeta.iter().any(|z| !z.is_finite()) || zeta.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("zeta must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `n` equally spaced coordinates on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect()
}

/// A sampled traveling-band profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub params: ModelParams,
    pub kind: ModelKind,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Records with columns `zeta,u,v`.
    pub fn records(&self) -> Vec<ProfileRecord> {
        self.zeta
            .iter()
            .zip(&self.u)
            .zip(&self.v)
            .map(|((&zeta, &u), &v)| ProfileRecord { zeta, u, v })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRecord {
    pub zeta: f64,
    pub u: f64,
    pub v: f64,
}

/// Width of the stretch where `u` is at least half its maximum, with linear
/// interpolation at both crossings. `None` unless `u` drops below half the
/// maximum on both sides of the peak.
pub fn half_max_width(zeta: &[f64], u: &[f64]) -> Option<f64> {
    let (peak, &top) = u.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * top;
    let cross = |i: usize, j: usize| zeta[i] + (half - u[i]) / (u[j] - u[i]) * (zeta[j] - zeta[i]);
    let left = (0..peak).rev().find(|&i| u[i] < half).map(|i| cross(i, i + 1))?;
    let right = (peak + 1..u.len()).find(|&i| u[i] < half).map(|i| cross(i - 1, i))?;
    Some(right - left)
}

/// Crowd-free unlimited-substrate band, normalized so that
/// `v = v_inf (1 + e^{-s zeta})^{-1/(d-1)}`.
pub fn eval_model1(zeta: &[f64], params: &ModelParams) -> Result<Profile> {
    ClosedForm::new(ModelKind::UnlimitedNoCrowd, params, DEFAULT_C7)?.profile(zeta)
}

/// Location and height of the single maximum of the model-1 organism profile.
pub fn umax_model1(params: &ModelParams) -> Result<(f64, f64)> {
    let d = params.d();
    if d <= 1.0 {
        return Err(Error::ConstraintViolation { d });
    }
    let zeta_star = (1.0 / (d - 1.0)).ln() / params.front_rate();
    let u_max = params.scale_q() * d.powf(-d / (d - 1.0));
    Ok((zeta_star, u_max))
}

/// Limited-substrate band with crowd effect; `c7` translates the band.
pub fn eval_model3(zeta: &[f64], params: &ModelParams, c7: f64) -> Result<Profile> {
    ClosedForm::new(ModelKind::LimitedCrowd, params, c7)?.profile(zeta)
}

/// Limited-substrate band without crowd effect.
pub fn eval_model4(zeta: &[f64], params: &ModelParams) -> Result<Profile> {
    ClosedForm::new(ModelKind::LimitedNoCrowd, params, DEFAULT_C7)?.profile(zeta)
}

/// Exponential envelopes `e^{lambda t} u` around a crowd-free baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPair {
    /// `e^{lambda_minus t} u`.
    pub u_minus: Vec<f64>,
    /// `e^{lambda_plus t} u`.
    pub u_plus: Vec<f64>,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub t: f64,
}

impl BoundPair {
    /// The pointwise lower envelope. For alpha < 0 the roles of the two
    /// scalings swap, which is the same as taking the smaller one.
    pub fn lower(&self) -> &[f64] {
        if self.lambda_minus <= self.lambda_plus { &self.u_minus } else { &self.u_plus }
    }

    pub fn upper(&self) -> &[f64] {
        if self.lambda_minus <= self.lambda_plus { &self.u_plus } else { &self.u_minus }
    }
}

/// Envelopes for the crowd-effect unlimited system around a model-1 baseline.
pub fn bounds_model2(baseline: &Profile, t: f64, params: &ModelParams) -> Result<BoundPair> {
    if baseline.kind != ModelKind::UnlimitedNoCrowd {
        return Err(Error::InvalidInput(format!(
            "envelope baseline must be a {} profile, got {}",
            ModelKind::UnlimitedNoCrowd,
            baseline.kind
        )));
    }
    let (a, b) = (baseline.params.raw(), params.raw());
    if (a.tau, a.mu, a.c, a.beta, a.k, a.v_inf) != (b.tau, b.mu, b.c, b.beta, b.k, b.v_inf) {
        return Err(Error::InvalidInput("baseline was built with different parameters".into()));
    }
    if crowd_neutral(params) {
        return Err(Error::DegenerateCrowd);
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be finite and non-negative, got {t}")));
    }
    let (lambda_minus, lambda_plus) = params.envelope_rates();
    let (fm, fp) = ((lambda_minus * t).exp(), (lambda_plus * t).exp());
    Ok(BoundPair {
        u_minus: baseline.u.iter().map(|u| fm * u).collect(),
        u_plus: baseline.u.iter().map(|u| fp * u).collect(),
        lambda_minus,
        lambda_plus,
        t,
    })
}

/// Limits of a closed-form band at both ends of the moving frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    pub u_minus_inf: f64,
    pub u_plus_inf: f64,
    pub v_minus_inf: f64,
    pub v_plus_inf: f64,
}

pub fn asymptotics(kind: ModelKind, params: &ModelParams) -> Result<Limits> {
    let v_inf = params.v_inf();
    let tau = params.tau();
    let c2 = params.c() * params.c();
    let u_minus_inf = match kind {
        ModelKind::UnlimitedNoCrowd => {
            if params.d() <= 1.0 {
                return Err(Error::ConstraintViolation { d: params.d() });
            }
            0.0
        }
        ModelKind::LimitedCrowd => 2.0 * tau * c2 / (params.k() * params.beta()) / (1.0 + params.gamma0() * tau),
        ModelKind::LimitedNoCrowd => tau * c2 / (params.k() * params.beta()),
        ModelKind::UnlimitedCrowd => return Err(Error::Unsupported(kind)),
    };
    Ok(Limits { u_minus_inf, u_plus_inf: 0.0, v_minus_inf: 0.0, v_plus_inf: v_inf })
}

//! Model parameters, derived constants and model selection.
//!
//! Units follow the usual bench convention for swimming bacteria: lengths in
//! cm, times in hours. Only the raw inputs are ever read from or written to a
//! parameter file; every derived constant is recomputed on load.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `gamma0 * tau == 1` used to route between the
/// crowd and crowd-free systems.
pub const CROWD_NEUTRAL_TOL: f64 = 1e-12;

/// The four traveling-band systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Constant consumption rate, no crowd term (Keller-Segel-like).
    UnlimitedNoCrowd,
    /// Constant consumption rate with the quorum crowd term; no closed form.
    UnlimitedCrowd,
    /// Consumption proportional to substrate, with crowd term.
    LimitedCrowd,
    /// Consumption proportional to substrate, no crowd term.
    LimitedNoCrowd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::UnlimitedNoCrowd,
        ModelKind::UnlimitedCrowd,
        ModelKind::LimitedCrowd,
        ModelKind::LimitedNoCrowd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::UnlimitedNoCrowd => "unlimited-no-crowd",
            ModelKind::UnlimitedCrowd => "unlimited-crowd",
            ModelKind::LimitedCrowd => "limited-crowd",
            ModelKind::LimitedNoCrowd => "limited-no-crowd",
        }
    }

    /// Substrate consumption is `k*u*v` rather than `k*u`.
    pub fn limited_substrate(self) -> bool {
        matches!(self, ModelKind::LimitedCrowd | ModelKind::LimitedNoCrowd)
    }

    /// The quorum term `gamma*tau*u*(ln v)_xx` carries its own coefficient.
    /// Crowd-free kinds fold it into the conservative drift with `gamma*tau = beta`.
    pub fn has_crowd_term(self) -> bool {
        matches!(self, ModelKind::UnlimitedCrowd | ModelKind::LimitedCrowd)
    }

    /// Unlimited-substrate bands exist only for `d > 1`.
    pub fn requires_d_above_one(self) -> bool {
        !self.limited_substrate()
    }

    pub fn has_closed_form(self) -> bool {
        self != ModelKind::UnlimitedCrowd
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model kind `{s}`")))
    }
}

fn default_one() -> f64 {
    1.0
}

/// Raw physical inputs, exactly as they appear in a parameter file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    /// Collision interval, h.
    pub tau: f64,
    /// Motility (jump variance per collision), cm^2.
    pub mu: f64,
    /// Band speed, cm/h.
    pub c: f64,
    /// Chemotactic coefficient.
    pub beta: f64,
    /// Quorum rate, 1/h.
    pub gamma0: f64,
    /// Substrate consumption rate, 1/h. Absent from the bench tables; all
    /// normalized outputs are invariant in it.
    #[serde(default = "default_one")]
    pub k: f64,
    /// Far-field substrate concentration.
    #[serde(default = "default_one")]
    pub v_inf: f64,
}

impl RawParams {
    /// Bench values: tau = 0.05 h, mu = 0.25, c = 1.5 cm/h, beta = 0.25 (d = 2),
    /// gamma0 = 25 1/h, k = 1, v_inf = 1.
    pub fn table_default() -> Self {
        RawParams { tau: 0.05, mu: 0.25, c: 1.5, beta: 0.25, gamma0: 25.0, k: 1.0, v_inf: 1.0 }
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        match name {
            "tau" => self.tau = value,
            "mu" => self.mu = value,
            "c" => self.c = value,
            "beta" => self.beta = value,
            "gamma0" => self.gamma0 = value,
            "k" => self.k = value,
            "v_inf" => self.v_inf = value,
            // d is set through beta at fixed mu
            "d" => self.beta = value * self.mu / 2.0,
            other => return Err(Error::InvalidInput(format!("unknown parameter `{other}`"))),
        }
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("tau", self.tau),
            ("mu", self.mu),
            ("c", self.c),
            ("beta", self.beta),
            ("gamma0", self.gamma0),
            ("k", self.k),
            ("v_inf", self.v_inf),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Parameter file layout: the raw inputs plus the model kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    #[serde(flatten)]
    pub raw: RawParams,
    pub kind: ModelKind,
}

impl ParamsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn derive(&self) -> Result<ModelParams> {
        derive_params(self.raw, self.kind)
    }
}

/// Validated parameters with every derived constant populated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    raw: RawParams,
    d: f64,
    gamma: f64,
    alpha: f64,
    curvature_bound: f64,
}

/// Validates the raw inputs for `kind` and computes the derived constants.
pub fn derive_params(raw: RawParams, kind: ModelKind) -> Result<ModelParams> {
    raw.validate()?;
    let d = 2.0 * raw.beta / raw.mu;
    if kind.requires_d_above_one() && d <= 1.0 {
        return Err(Error::ConstraintViolation { d });
    }
    let gamma = raw.beta * raw.gamma0;
    let alpha = gamma * raw.tau - raw.beta;
    let curvature_bound = if d > 1.0 {
        (raw.tau * raw.c / raw.mu).powi(2) / (d - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(ModelParams { raw, d, gamma, alpha, curvature_bound })
}

impl ModelParams {
    pub fn raw(&self) -> RawParams {
        self.raw
    }
    pub fn tau(&self) -> f64 {
        self.raw.tau
    }
    pub fn mu(&self) -> f64 {
        self.raw.mu
    }
    pub fn c(&self) -> f64 {
        self.raw.c
    }
    pub fn beta(&self) -> f64 {
        self.raw.beta
    }
    pub fn gamma0(&self) -> f64 {
        self.raw.gamma0
    }
    pub fn k(&self) -> f64 {
        self.raw.k
    }
    pub fn v_inf(&self) -> f64 {
        self.raw.v_inf
    }

    /// d = 2 beta / mu, chemotactic response relative to motility.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Crowd stimulation coefficient gamma = beta * gamma0.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Coefficient of the crowd term actually used by `kind`: crowd-free
    /// systems carry `gamma * tau = beta`.
    pub fn effective_gamma(&self, kind: ModelKind) -> f64 {
        if kind.has_crowd_term() {
            self.gamma
        } else {
            self.raw.beta / self.raw.tau
        }
    }

    /// alpha = gamma tau - beta, the excess of the crowd term over the neutral value.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// B = tau^2 c^2 / (mu^2 (d - 1)), the maximum of |(ln v)''| for the
    /// crowd-free unlimited band. Infinite when d <= 1.
    pub fn curvature_bound(&self) -> f64 {
        self.curvature_bound
    }

    /// Envelope rates (lambda_minus, lambda_plus) = (-alpha B / tau, alpha B / tau).
    pub fn envelope_rates(&self) -> (f64, f64) {
        let rate = self.alpha * self.curvature_bound / self.raw.tau;
        (-rate, rate)
    }

    /// Q = 2 tau c^2 v_inf / (k mu).
    pub fn scale_q(&self) -> f64 {
        self.scale_q2() * self.raw.v_inf
    }

    /// Q1 = 2 tau c^2 / (k beta).
    pub fn scale_q1(&self) -> f64 {
        2.0 * self.raw.tau * self.raw.c * self.raw.c / (self.raw.k * self.raw.beta)
    }

    /// Q2 = 2 tau c^2 / (k mu).
    pub fn scale_q2(&self) -> f64 {
        2.0 * self.raw.tau * self.raw.c * self.raw.c / (self.raw.k * self.raw.mu)
    }

    /// Organism normalization used for plotting each kind.
    pub fn organism_scale(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::UnlimitedNoCrowd | ModelKind::UnlimitedCrowd => self.scale_q(),
            ModelKind::LimitedCrowd => self.scale_q1(),
            ModelKind::LimitedNoCrowd => self.scale_q2(),
        }
    }

    /// Exponential rate 2 tau c / mu of every closed-form front, 1/cm.
    pub fn front_rate(&self) -> f64 {
        2.0 * self.raw.tau * self.raw.c / self.raw.mu
    }

    /// Characteristic band width mu / (tau c), cm.
    pub fn band_width(&self) -> f64 {
        self.raw.mu / (self.raw.tau * self.raw.c)
    }
}

/// True when gamma0 * tau = 1, i.e. the crowd term reduces to the conservative
/// chemotactic flux and the crowd-free system applies.
pub fn crowd_neutral(params: &ModelParams) -> bool {
    (params.gamma0() * params.tau() - 1.0).abs() < CROWD_NEUTRAL_TOL
}

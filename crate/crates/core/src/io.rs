//! CSV and JSON output. Floats are written with 17 significant digits so that
//! identical inputs give byte-identical files, and every file is written to a
//! temporary sibling first and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::Profile;
use crate::error::Result;
use crate::params::{ModelKind, RawParams};
use crate::pde::{FieldState, Grid1D};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path` atomically: readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Compact, filesystem-safe tag of the raw parameters, e.g.
/// `tau0.05_mu0.25_c1.5_beta0.25_gamma0-25_k1_vinf1`. `c7` is appended when
/// it shapes the profile.
pub fn param_tag(raw: &RawParams, kind: ModelKind, c7: f64) -> String {
    let mut tag = format!(
        "tau{}_mu{}_c{}_beta{}_gamma0-{}_k{}_vinf{}",
        raw.tau, raw.mu, raw.c, raw.beta, raw.gamma0, raw.k, raw.v_inf
    );
    if kind == ModelKind::LimitedCrowd {
        let _ = write!(tag, "_c7-{c7}");
    }
    tag
}

/// One output row of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub zeta: f64,
    /// `c zeta / mu`, the coordinate used on the figure axes.
    pub zeta_scaled: f64,
    pub u: f64,
    pub v: f64,
    /// `u` divided by the kind's organism scale (Q, Q1 or Q2).
    pub u_normalized: f64,
    pub v_over_vinf: f64,
}

pub fn profile_rows(profile: &Profile) -> Vec<ProfileRow> {
    let p = &profile.params;
    let scale = p.organism_scale(profile.kind);
    let zeta_factor = p.c() / p.mu();
    profile
        .records()
        .into_iter()
        .map(|r| ProfileRow {
            zeta: r.zeta,
            zeta_scaled: zeta_factor * r.zeta,
            u: r.u,
            v: r.v,
            u_normalized: r.u / scale,
            v_over_vinf: r.v / p.v_inf(),
        })
        .collect()
}

pub fn profile_csv(profile: &Profile) -> String {
    let mut out = String::from("zeta,zeta_scaled,u,v,u_normalized,v_over_vinf\n");
    for r in profile_rows(profile) {
        let cols = [r.zeta, r.zeta_scaled, r.u, r.v, r.u_normalized, r.v_over_vinf].map(fmt_f64);
        let _ = writeln!(out, "{}", cols.join(","));
    }
    out
}

#[derive(Serialize)]
struct ProfileDoc {
    kind: ModelKind,
    params: RawParams,
    c7: f64,
    records: Vec<ProfileRow>,
}

pub fn profile_json(profile: &Profile, c7: f64) -> Result<String> {
    let doc = ProfileDoc {
        kind: profile.kind,
        params: profile.params.raw(),
        c7,
        records: profile_rows(profile),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Which integrator produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Analytic,
    Pde,
    Kernel,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Pde => "pde",
            Engine::Kernel => "kernel",
        }
    }
}

/// `x,u,v` blocks, each preceded by a `# t=<hours>` line.
pub fn trajectory_csv(states: &[FieldState]) -> String {
    let mut out = String::new();
    for s in states {
        let _ = writeln!(out, "# t={}", fmt_f64(s.t));
        out.push_str("x,u,v\n");
        for (i, (u, v)) in s.u.iter().zip(&s.v).enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f64(s.grid.x(i)), fmt_f64(*u), fmt_f64(*v));
        }
    }
    out
}

#[derive(Serialize)]
struct Snapshot<'a> {
    t: f64,
    u: &'a [f64],
    v: &'a [f64],
}

#[derive(Serialize)]
struct TrajectoryDoc<'a> {
    engine: Engine,
    kind: ModelKind,
    params: RawParams,
    grid: Grid1D,
    dx: f64,
    snapshots: Vec<Snapshot<'a>>,
}

/// Trajectory document with grid metadata and the producing engine.
pub fn trajectory_json(states: &[FieldState], engine: Engine, kind: ModelKind, params: &RawParams) -> Result<String> {
    let grid = states.first().map(|s| s.grid).ok_or_else(|| crate::Error::InvalidInput("empty trajectory".into()))?;
    let doc = TrajectoryDoc {
        engine,
        kind,
        params: *params,
        grid,
        dx: grid.dx(),
        snapshots: states.iter().map(|s| Snapshot { t: s.t, u: &s.u, v: &s.v }).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

//! Command-line front end: `analytic`, `simulate`, `verify` and `sweep`.
//!
//! Exit codes: 0 success, 1 a gated check failed, 2 usage or configuration
//! error, 3 numerical failure. `BANDLAB_THREADS` caps the worker count.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{half_max_width, umax_model1, uniform_grid, ClosedForm, Profile};
use crate::error::{Error, Result};
use crate::io::{self, param_tag, write_atomic, Engine};
use crate::kernel::{run_kernel, KernelSpec};
use crate::params::{derive_params, ModelKind, ModelParams, ParamsFile, RawParams};
use crate::pde::{cfl_limit, init_state, measure_front_speed, run as run_pde, FieldState, Grid1D, InitKind, SolverConfig, Upwind};
use crate::verify::{run_suite, Suite, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BANDLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bandlab", version, about = "Chemotactic traveling bands: profiles, simulations and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a closed-form band profile.
    Analytic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        zeta: ZetaArgs,
    },
    /// Integrate a model with the finite-difference solver or the jump kernel.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = EngineArg::Pde)]
        engine: EngineArg,
    },
    /// Run a verification suite and write JSON and text reports.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Solver grid spacing, cm.
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        /// Solver domain half width, cm.
        #[arg(long, default_value_t = 35.0)]
        half_width: f64,
    },
    /// Repeat `analytic` or `simulate` over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `<param>=<v1,v2,...>` with param one of tau, beta, gamma0, d, c7.
        #[arg(long)]
        sweep: String,
        #[arg(long, value_enum, default_value_t = EngineArg::Analytic)]
        engine: EngineArg,
        #[command(flatten)]
        zeta: ZetaArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON parameter file with tau, mu, c, beta, gamma0, k, v_inf and kind.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Model kind; overrides the parameter file.
    #[arg(long)]
    pub kind: Option<ModelKind>,
    /// Override one raw parameter, e.g. `--set d=1.3`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Translation constant of the limited-substrate crowd band.
    #[arg(long, default_value_t = 1.0)]
    pub c7: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ZetaArgs {
    /// Lower end of the zeta window; defaults to 30 decay lengths below the band center.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta_min: Option<f64>,
    /// Upper end of the zeta window; defaults to 30 decay lengths above the band center.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta_max: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0.01)]
    pub dx: f64,
    #[arg(long, default_value_t = -35.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 35.0, allow_hyphen_values = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Snapshots after the initial state (finite-difference engine).
    #[arg(long, default_value_t = 10)]
    pub snapshots: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Analytic)]
    pub init: InitArg,
    /// Translation of the analytic initial band, cm.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub shift: f64,
    #[arg(long, value_enum, default_value_t = UpwindArg::Second)]
    pub upwind: UpwindArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Analytic,
    Pde,
    Kernel,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::Pde => Engine::Pde,
            EngineArg::Kernel => Engine::Kernel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Analytic,
    Step,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpwindArg {
    First,
    Second,
}

/// Parameters resolved from the file, `--kind` and `--set`.
#[derive(Debug, Clone, Copy)]
struct Setup {
    raw: RawParams,
    kind: ModelKind,
    c7: f64,
}

fn parse_assignment(text: &str) -> Result<(&str, &str)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::InvalidInput(format!("expected NAME=VALUE, got `{text}`")))
}

fn parse_number(text: &str) -> Result<f64> {
    text.parse().map_err(|_| Error::InvalidInput(format!("not a number: `{text}`")))
}

fn resolve(common: &Common, need_kind: bool) -> Result<Setup> {
    let file = match &common.params {
        Some(path) => Some(ParamsFile::from_json(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let mut raw = file.map_or_else(RawParams::table_default, |f| f.raw);
    let kind = match (common.kind, file.map(|f| f.kind)) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) if need_kind => return Err(Error::InvalidInput("no model kind: pass --kind or a parameter file".into())),
        (None, None) => ModelKind::LimitedNoCrowd,
    };
    for assignment in &common.set {
        let (name, value) = parse_assignment(assignment)?;
        raw = raw.with(name, parse_number(value)?)?;
    }
    if !(common.c7.is_finite() && common.c7 > 0.0) {
        return Err(Error::NonPositiveParameter { name: "c7", value: common.c7 });
    }
    Ok(Setup { raw, kind, c7: common.c7 })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Center of the band: the organism maximum for the unlimited band, the
/// half-plateau point for the limited ones.
fn band_center(kind: ModelKind, params: &ModelParams, c7: f64) -> Result<f64> {
    Ok(match kind {
        ModelKind::UnlimitedNoCrowd => umax_model1(params)?.0,
        ModelKind::LimitedCrowd => c7.ln() / params.front_rate(),
        ModelKind::LimitedNoCrowd => params.d().ln() / params.front_rate(),
        ModelKind::UnlimitedCrowd => return Err(Error::Unsupported(kind)),
    })
}

fn analytic_profile(setup: &Setup, zeta: &ZetaArgs) -> Result<Profile> {
    let params = derive_params(setup.raw, setup.kind)?;
    let form = ClosedForm::new(setup.kind, &params, setup.c7)?;
    let center = band_center(setup.kind, &params, setup.c7)?;
    let reach = 30.0 / params.front_rate();
    let lo = zeta.zeta_min.unwrap_or(center - reach);
    let hi = zeta.zeta_max.unwrap_or(center + reach);
    if zeta.points < 2 || hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::InvalidInput(format!("bad zeta window [{lo}, {hi}] with {} points", zeta.points)));
    }
    form.profile(&uniform_grid(lo, hi, zeta.points))
}

fn cmd_analytic(setup: &Setup, zeta: &ZetaArgs, out: &Path, format: Format) -> Result<(PathBuf, Profile)> {
    let profile = analytic_profile(setup, zeta)?;
    let path = out.join(format!("profile_{}_{}.{}", setup.kind, param_tag(&setup.raw, setup.kind, setup.c7), extension(format)));
    let body = match format {
        Format::Csv => io::profile_csv(&profile),
        Format::Json => io::profile_json(&profile, setup.c7)?,
    };
    write_atomic(&path, body.as_bytes())?;
    Ok((path, profile))
}

#[derive(Debug, Serialize)]
struct Cfl {
    /// `dt` over the diffusion stability limit.
    diffusion: f64,
    /// Largest `|drift| dt / dx` of the initial state.
    advection: f64,
}

#[derive(Debug, Serialize)]
struct Metadata {
    engine: Engine,
    kind: ModelKind,
    params: RawParams,
    grid: Grid1D,
    dx: f64,
    dt: f64,
    t_end: f64,
    steps: usize,
    snapshots: usize,
    /// Stability numbers of the finite-difference engine.
    cfl: Option<Cfl>,
    /// Jump standard deviation in grid cells (kernel engine).
    sigma_cells: Option<f64>,
    wall_time_s: f64,
}

fn max_advection(state: &FieldState, params: &ModelParams, dt: f64) -> f64 {
    let dx = state.grid.dx();
    let drift = params.beta() / params.tau();
    state
        .v
        .windows(2)
        .map(|w| (drift * (w[1].ln() - w[0].ln()) / dx).abs() * dt / dx)
        .fold(0.0, f64::max)
}

fn cmd_simulate(setup: &Setup, sim: &SimArgs, engine: EngineArg, out: &Path, format: Format) -> Result<(PathBuf, Vec<FieldState>)> {
    let params = derive_params(setup.raw, setup.kind)?;
    let grid = Grid1D::with_spacing(sim.x_min, sim.x_max, sim.dx)?;
    let init = match sim.init {
        InitArg::Analytic => InitKind::Analytic { shift: sim.shift },
        InitArg::Step => InitKind::Step,
        InitArg::Bump => InitKind::GaussianBump { center: sim.shift, width: params.band_width(), mass: 1.0 },
    };
    let start = init_state(&grid, setup.kind, &params, init)?;
    let clock = Instant::now();
    let (traj, dt, steps, sigma_cells) = match engine {
        EngineArg::Pde => {
            let upwind = match sim.upwind {
                UpwindArg::First => Upwind::First,
                UpwindArg::Second => Upwind::Second,
            };
            let config = SolverConfig::at_cfl(&grid, &params, sim.t_end, sim.snapshots)?.with_upwind(upwind);
            (run_pde(&start, setup.kind, &params, &config)?, config.dt, config.steps(), None)
        }
        EngineArg::Kernel => {
            let traj = run_kernel(&start, &params, &KernelSpec::default(), setup.kind, sim.t_end)?;
            let steps = traj.len() - 1;
            (traj, params.tau(), steps, Some(params.mu().sqrt() / grid.dx()))
        }
        EngineArg::Analytic => return Err(Error::InvalidInput("simulate needs --engine pde or kernel".into())),
    };
    let wall_time_s = clock.elapsed().as_secs_f64();
    let engine = Engine::from(engine);
    let stem = format!("{}_{}_{}", engine.name(), setup.kind, param_tag(&setup.raw, setup.kind, setup.c7));
    let path = out.join(format!("trajectory_{stem}.{}", extension(format)));
    let body = match format {
        Format::Csv => io::trajectory_csv(&traj),
        Format::Json => io::trajectory_json(&traj, engine, setup.kind, &setup.raw)?,
    };
    write_atomic(&path, body.as_bytes())?;
    let meta = Metadata {
        engine,
        kind: setup.kind,
        params: setup.raw,
        grid,
        dx: grid.dx(),
        dt,
        t_end: sim.t_end,
        steps,
        snapshots: traj.len(),
        cfl: (engine == Engine::Pde)
            .then(|| Cfl { diffusion: dt / cfl_limit(&grid, &params), advection: max_advection(&start, &params, dt) }),
        sigma_cells,
        wall_time_s,
    };
    write_atomic(&out.join(format!("metadata_{stem}.json")), (serde_json::to_string_pretty(&meta)? + "\n").as_bytes())?;
    Ok((path, traj))
}

fn cmd_verify(setup: &Setup, suite: Suite, dx: f64, half_width: f64, out: &Path) -> Result<bool> {
    let config = VerifyConfig { dx, half_width, c7: setup.c7, ..VerifyConfig::new(setup.raw) };
    let report = run_suite(suite, &config)?;
    let table = report.to_table();
    write_atomic(&out.join(format!("verify_{}.json", suite.name())), report.to_json()?.as_bytes())?;
    write_atomic(&out.join(format!("verify_{}.txt", suite.name())), table.as_bytes())?;
    print!("{table}");
    Ok(report.passed())
}

/// Sweepable axes.
const SWEEP_AXES: [&str; 5] = ["tau", "beta", "gamma0", "d", "c7"];

fn parse_sweep(text: &str) -> Result<(String, Vec<f64>)> {
    let (name, values) = parse_assignment(text)?;
    if !SWEEP_AXES.contains(&name) {
        return Err(Error::InvalidInput(format!("cannot sweep `{name}`; choose one of {}", SWEEP_AXES.join(", "))));
    }
    let values = values.split(',').map(|v| parse_number(v.trim())).collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::InvalidInput("empty sweep".into()));
    }
    Ok((name.to_string(), values))
}

fn apply_sweep(setup: &Setup, name: &str, value: f64) -> Result<Setup> {
    if name == "c7" {
        if setup.kind != ModelKind::LimitedCrowd {
            return Err(Error::InvalidInput(format!("c7 only shapes the {} band", ModelKind::LimitedCrowd)));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonPositiveParameter { name: "c7", value });
        }
        return Ok(Setup { c7: value, ..*setup });
    }
    Ok(Setup { raw: setup.raw.with(name, value)?, ..*setup })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), io::fmt_f64)
}

fn cmd_sweep(common: &Common, setup: &Setup, spec: &str, engine: EngineArg, zeta: &ZetaArgs, sim: &SimArgs) -> Result<Vec<PathBuf>> {
    let (name, values) = parse_sweep(spec)?;
    let setups = values.iter().map(|&v| apply_sweep(setup, &name, v)).collect::<Result<Vec<_>>>()?;
    let out = &common.out;
    let rows: Vec<(PathBuf, String)> = setups
        .par_iter()
        .zip(&values)
        .map(|(s, &value)| -> Result<(PathBuf, String)> {
            match engine {
                EngineArg::Analytic => {
                    let (path, profile) = cmd_analytic(s, zeta, out, common.format)?;
                    let (peak, &u_peak) = profile.u.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("profile has points");
                    let width = half_max_width(&profile.zeta, &profile.u);
                    let row = [io::fmt_f64(value), io::fmt_f64(profile.zeta[peak]), io::fmt_f64(u_peak), io::fmt_f64(profile.u[0]), fmt_opt(width)];
                    Ok((path, row.join(",")))
                }
                _ => {
                    let (path, traj) = cmd_simulate(s, sim, engine, out, common.format)?;
                    let params = derive_params(s.raw, s.kind)?;
                    let speed = if traj.len() >= 3 { measure_front_speed(&traj, 0.5, params.v_inf()).ok() } else { None };
                    Ok((path, format!("{},{}", io::fmt_f64(value), fmt_opt(speed))))
                }
            }
        })
        .collect::<Result<_>>()?;
    let header = match engine {
        EngineArg::Analytic => "value,peak_zeta,peak_u,u_left,half_max_width,file",
        _ => "value,front_speed,file",
    };
    let mut summary = format!("{header}\n");
    for (path, row) in &rows {
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        summary.push_str(&format!("{row},{file}\n"));
    }
    let summary_path = out.join(format!("sweep_{}_{}_{}.csv", Engine::from(engine).name(), setup.kind, name));
    write_atomic(&summary_path, summary.as_bytes())?;
    let mut paths: Vec<PathBuf> = rows.into_iter().map(|(p, _)| p).collect();
    paths.push(summary_path);
    Ok(paths)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got `{text}`")))?;
    // A pool may already exist when called more than once in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Analytic { common, zeta } => {
            let setup = resolve(&common, true)?;
            ensure_dir(&common.out)?;
            let (path, _) = cmd_analytic(&setup, &zeta, &common.out, common.format)?;
            println!("{}", path.display());
        }
        Command::Simulate { common, sim, engine } => {
            let setup = resolve(&common, true)?;
            ensure_dir(&common.out)?;
            let (path, _) = cmd_simulate(&setup, &sim, engine, &common.out, common.format)?;
            println!("{}", path.display());
        }
        Command::Verify { common, suite, dx, half_width } => {
            let setup = resolve(&common, false)?;
            ensure_dir(&common.out)?;
            if !cmd_verify(&setup, suite, dx, half_width, &common.out)? {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Sweep { common, sweep, engine, zeta, sim } => {
            let setup = resolve(&common, true)?;
            ensure_dir(&common.out)?;
            for path in cmd_sweep(&common, &setup, &sweep, engine, &zeta, &sim)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! Job description shared by the flags and the `--config` JSON file.
//!
//! Times in the job are physical (`t`, with `τ = h·t`). Unset grid bounds
//! default to `τ ∈ [−6, 6]` with `dτ = 1e−3`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pulseforge::families::FamilySpec;
use pulseforge::params::TimeGrid;
use pulseforge::synth::BranchMode;
use pulseforge::wgen::ProfileSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_TAU_SPAN: f64 = 6.0;
pub const DEFAULT_DTAU: f64 = 1e-3;
pub const DEFAULT_TOL_VERIFY: f64 = 1e-8;
pub const DEFAULT_TAU_F: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    List,
    Synth,
    Verify,
    Wgen,
    Rotate,
    Reproduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    All,
}

/// Grid in physical time. Either `dt` or `n` may be given, not both.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

/// Rotation target `n_z sin(θ/2)` and angle `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub nz_sin_half: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub mode: BranchMode,
    #[serde(default = "default_tol_verify")]
    pub tol_verify: f64,
    /// Constant control for the `h = 0` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j0: Option<f64>,
    /// Half-duration `h·t_f` of the pulse for `rotate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<Figure>,
    /// File (or directory, for `reproduce`); stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// `wgen`: emit the `(q, W)` table instead of the pulse.
    #[serde(default)]
    pub w_table: bool,
}

fn default_h() -> f64 {
    1.0
}

fn default_tol_verify() -> f64 {
    DEFAULT_TOL_VERIFY
}

impl JobSpec {
    pub fn new(command: Command) -> Self {
        JobSpec {
            command,
            family: None,
            profile: None,
            h: default_h(),
            grid: GridSpec::default(),
            mode: BranchMode::default(),
            tol_verify: DEFAULT_TOL_VERIFY,
            j0: None,
            tau_f: None,
            target: None,
            figure: None,
            output: None,
            format: Format::default(),
            w_table: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Spec(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Spec(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return Err(CliError::Spec(format!("h must be finite and >= 0 (got {})", self.h)));
        }
        if !(self.tol_verify > 0.0) {
            return Err(CliError::Spec(format!("tol_verify must be > 0 (got {})", self.tol_verify)));
        }
        if self.grid.dt.is_some() && self.grid.n.is_some() {
            return Err(CliError::Spec("grid: give either dt or n, not both".into()));
        }
        Ok(())
    }

    /// Time unit for defaults: `1/h`, or 1 when `h = 0`.
    fn unit(&self) -> f64 {
        if self.h > 0.0 {
            1.0 / self.h
        } else {
            1.0
        }
    }

    /// Physical `(tmin, tmax)`.
    pub fn span(&self) -> (f64, f64) {
        let u = self.unit();
        (
            self.grid.tmin.unwrap_or(-DEFAULT_TAU_SPAN * u),
            self.grid.tmax.unwrap_or(DEFAULT_TAU_SPAN * u),
        )
    }

    /// Grid in the pipeline's time variable: `τ` when `h > 0`, `t` when `h = 0`.
    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        let (lo, hi) = self.span();
        let s = if self.h > 0.0 { self.h } else { 1.0 };
        let grid = match self.grid.n {
            Some(n) => TimeGrid::uniform(s * lo, s * hi, n)?,
            None => {
                let dt = self.grid.dt.unwrap_or(DEFAULT_DTAU * self.unit());
                TimeGrid::with_step(s * lo, s * hi, s * dt)?
            }
        };
        Ok(grid)
    }
}

/// Flags common to every subcommand. Anything given here overrides the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct JobArgs {
    /// JSON job file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved job as JSON and exit.
    #[arg(long)]
    pub print_config: bool,

    /// Generator family (see `list`).
    #[arg(long)]
    pub family: Option<String>,
    /// Family or profile parameter `a`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Family parameter `b`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Extra family parameter as `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,

    /// P(q) profile for `wgen`: circle, tanh_sq, arctan_trig or polynomial.
    #[arg(long)]
    pub profile: Option<String>,
    /// Polynomial coefficients of P in powers of q, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Option<Vec<f64>>,
    /// Lower end of the polynomial profile's domain.
    #[arg(long, allow_hyphen_values = true)]
    pub q_min: Option<f64>,
    /// Emit the (q, W) table instead of the pulse.
    #[arg(long)]
    pub w_table: bool,

    /// Physical splitting; 0 selects the pure z-rotation mode.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tmax: Option<f64>,
    /// Physical time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of grid points (instead of --dt).
    #[arg(long, conflicts_with = "dt")]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<BranchMode>,
    #[arg(long)]
    pub tol_verify: Option<f64>,
    /// Constant control for h = 0.
    #[arg(long, allow_hyphen_values = true)]
    pub j0: Option<f64>,
    /// Pulse half-duration h*t_f for `rotate`.
    #[arg(long)]
    pub tau_f: Option<f64>,
    /// Target n_z sin(theta/2) for the rotation tuner.
    #[arg(long, allow_hyphen_values = true, requires = "theta")]
    pub target: Option<f64>,
    /// Target rotation angle.
    #[arg(long, requires = "target")]
    pub theta: Option<f64>,
    #[arg(long, value_enum)]
    pub figure: Option<Figure>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn parse_mode(s: &str) -> Result<BranchMode, String> {
    match s {
        "literal" => Ok(BranchMode::Literal),
        "signed" => Ok(BranchMode::Signed),
        other => Err(format!("unknown mode `{other}` (literal or signed)")),
    }
}

fn parse_param(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Spec(format!("--param expects NAME=VALUE (got `{s}`)")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::Spec(format!("--param {k}: `{v}` is not a number")))?;
    Ok((k.trim().to_string(), v))
}

fn profile_from_args(name: &str, args: &JobArgs) -> Result<ProfileSpec, CliError> {
    let need_a = || args.a.ok_or_else(|| CliError::Spec(format!("profile `{name}` needs --a")));
    Ok(match name {
        "circle" => ProfileSpec::Circle,
        "tanh_sq" => ProfileSpec::TanhSq { a: need_a()? },
        "arctan_trig" => ProfileSpec::ArctanTrig { a: need_a()? },
        "polynomial" => ProfileSpec::Polynomial {
            coeffs: args
                .coeffs
                .clone()
                .ok_or_else(|| CliError::Spec("profile `polynomial` needs --coeffs".into()))?,
            q_min: args.q_min,
        },
        other => {
            return Err(CliError::Spec(format!(
                "unknown profile `{other}` (circle, tanh_sq, arctan_trig, polynomial)"
            )))
        }
    })
}

impl JobArgs {
    /// Config file (if any) overlaid with the flags.
    pub fn resolve(&self, command: Option<Command>) -> Result<JobSpec, CliError> {
        let mut job = match &self.config {
            Some(path) => JobSpec::load(path)?,
            None => JobSpec::new(command.unwrap_or(Command::List)),
        };
        if let Some(c) = command {
            job.command = c;
        }

        let mut extra: BTreeMap<String, f64> = BTreeMap::new();
        if let Some(a) = self.a {
            extra.insert("a".into(), a);
        }
        if let Some(b) = self.b {
            extra.insert("b".into(), b);
        }
        for p in &self.params {
            let (k, v) = parse_param(p)?;
            extra.insert(k, v);
        }

        if let Some(name) = &self.profile {
            job.profile = Some(profile_from_args(name, self)?);
        }
        if let Some(name) = &self.family {
            job.family = Some(FamilySpec { family: name.clone(), params: BTreeMap::new() });
        }
        match (&mut job.family, self.profile.is_some()) {
            (Some(f), _) => f.params.extend(extra),
            (None, true) => {}
            (None, false) if !extra.is_empty() && job.profile.is_none() => {
                return Err(CliError::Spec("family parameters given without --family".into()))
            }
            (None, false) => {}
        }

        if let Some(h) = self.h {
            job.h = h;
        }
        if self.tmin.is_some() {
            job.grid.tmin = self.tmin;
        }
        if self.tmax.is_some() {
            job.grid.tmax = self.tmax;
        }
        if self.dt.is_some() {
            job.grid.dt = self.dt;
            job.grid.n = None;
        }
        if self.n.is_some() {
            job.grid.n = self.n;
            job.grid.dt = None;
        }
        if let Some(m) = self.mode {
            job.mode = m;
        }
        if let Some(t) = self.tol_verify {
            job.tol_verify = t;
        }
        if self.j0.is_some() {
            job.j0 = self.j0;
        }
        if self.tau_f.is_some() {
            job.tau_f = self.tau_f;
        }
        if let (Some(nz_sin_half), Some(theta)) = (self.target, self.theta) {
            job.target = Some(TargetSpec { nz_sin_half, theta });
        }
        if self.figure.is_some() {
            job.figure = self.figure;
        }
        if self.output.is_some() {
            job.output = self.output.clone();
        }
        if let Some(f) = self.format {
            job.format = f;
        }
        if self.w_table {
            job.w_table = true;
        }
        job.validate()?;
        Ok(job)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_round_trips() {
        let mut job = JobSpec::new(Command::Verify);
        job.family = Some(FamilySpec::new("gauss_cos", &[("b", 0.5)]));
        job.grid = GridSpec { tmin: Some(-3.0), tmax: Some(4.0), dt: Some(0.01), n: None };
        job.mode = BranchMode::Signed;
        job.target = Some(TargetSpec { nz_sin_half: 0.0, theta: 3.0 });
        job.profile = Some(ProfileSpec::Polynomial { coeffs: vec![1.0, 0.0, -1.0], q_min: None });
        let text = serde_json::to_string(&job).unwrap();
        let back: JobSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, job);
    }

    #[test]
    fn defaults_fill_in() {
        let job: JobSpec = serde_json::from_str(r#"{"command":"synth","family":{"family":"tanh","a":1.0}}"#).unwrap();
        assert_eq!(job.h, 1.0);
        assert_eq!(job.tol_verify, 1e-8);
        assert_eq!(job.span(), (-6.0, 6.0));
        let g = job.time_grid().unwrap();
        assert_eq!(g.len(), 12001);
        assert!(serde_json::from_str::<JobSpec>(r#"{"command":"synth","bogus":1}"#).is_err());
    }

    #[test]
    fn default_span_scales_with_h() {
        let mut job = JobSpec::new(Command::Synth);
        job.h = 2.0;
        assert_eq!(job.span(), (-3.0, 3.0));
        let g = job.time_grid().unwrap();
        assert_eq!((g.first(), g.last()), (-6.0, 6.0));
        assert!((g.uniform_step().unwrap() - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn flags_override_config() {
        let args = JobArgs { family: Some("gauss_cos".into()), b: Some(1.0), dt: Some(0.1), ..Default::default() };
        let job = args.resolve(Some(Command::Synth)).unwrap();
        assert_eq!(job.family.unwrap().params["b"], 1.0);
        assert_eq!(job.grid.dt, Some(0.1));
        let orphan = JobArgs { a: Some(1.0), ..Default::default() };
        assert!(orphan.resolve(Some(Command::Synth)).is_err());
    }
}

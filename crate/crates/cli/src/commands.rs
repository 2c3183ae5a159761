use std::collections::BTreeMap;
use std::f64::consts::PI;

use pulseforge::families::{FamilySpec, QFamily, BUILTIN_FAMILIES};
use pulseforge::params::{ModelParams, TimeGrid};
use pulseforge::rotation::{self, TailFit, XzPlaneReport};
use pulseforge::su2::RotationSpec;
use pulseforge::synth::{
    synthesize, synthesize_zero_splitting, AnalyticModel, BranchMode, Diagnostics, PulseSolution, SynthFrame,
};
use pulseforge::verify::{compare, PropagatorConfig, Scheme};
use pulseforge::wgen::{self, BranchEnd, PSpec, WTable};
use serde::Serialize;

use crate::error::CliError;
use crate::job::{Format, JobSpec, DEFAULT_TAU_F};
use crate::output::{emit, pulse_csv, row};

const PROFILES: &[(&str, &str, &str)] = &[
    ("circle", "", "P = 1 - q^2 (gives q = cos tau)"),
    ("tanh_sq", "a", "P = 2(1 - q)(1 - 2a^2 (1 - q))^2, gives the tanh family"),
    ("arctan_trig", "a", "profile of the arctan_trig family (periodic q)"),
    ("polynomial", "coeffs, q_min", "P = sum c_k q^k on [q_min, 1]"),
];

fn family_of(spec: &Option<FamilySpec>, what: &str) -> Result<QFamily, CliError> {
    let spec = spec
        .as_ref()
        .ok_or_else(|| CliError::Spec(format!("{what} needs a family (--family NAME)")))?;
    Ok(spec.build()?)
}

fn model_params(job: &JobSpec) -> ModelParams {
    ModelParams { h: job.h, tol_verify: job.tol_verify, ..Default::default() }
}

/// `h = 0`: the control is the constant `j0`, or the named family's `J/h`
/// profile reused as a shape in physical time.
fn zero_splitting(job: &JobSpec, grid: &TimeGrid) -> Result<PulseSolution, CliError> {
    let tol = ModelParams::default().tol_quad;
    let mut sol = match (job.j0, &job.family) {
        (Some(j0), _) => {
            if !j0.is_finite() {
                return Err(CliError::Spec(format!("j0 must be finite (got {j0})")));
            }
            synthesize_zero_splitting(&|_| j0, grid, tol)?
        }
        (None, Some(spec)) => {
            let f = spec.build()?;
            let model = AnalyticModel::new(&f, &ModelParams::default(), job.mode, grid.first(), grid.last())?;
            let mut sol = synthesize_zero_splitting(&|t| model.jh_at(t).unwrap_or(f64::NAN), grid, tol)?;
            sol.family = format!("zero_splitting:{}", f.name());
            sol.family_params = f.params().clone();
            sol
        }
        (None, None) => {
            return Err(CliError::Spec("h = 0 needs a control: --j0 VALUE or --family NAME for its shape".into()))
        }
    };
    if let Some(j0) = job.j0 {
        sol.family_params.insert("j0".into(), j0);
    }
    Ok(sol)
}

pub fn solve_family(job: &JobSpec, f: &QFamily) -> Result<PulseSolution, CliError> {
    let grid = job.time_grid()?;
    Ok(synthesize(f, &model_params(job), &grid, job.mode)?)
}

pub fn solve(job: &JobSpec) -> Result<PulseSolution, CliError> {
    if job.h == 0.0 {
        return zero_splitting(job, &job.time_grid()?);
    }
    let f = family_of(&job.family, "this command")?;
    solve_family(job, &f)
}

#[derive(Serialize)]
struct PulseJson<'a> {
    family: &'a str,
    params: &'a BTreeMap<String, f64>,
    h: f64,
    mode: BranchMode,
    diagnostics: &'a Diagnostics,
    frames: &'a [SynthFrame],
}

fn emit_pulse(job: &JobSpec, sol: &PulseSolution) -> Result<(), CliError> {
    let text = match job.format {
        Format::Csv => pulse_csv(sol),
        Format::Json => {
            let doc = PulseJson {
                family: &sol.family,
                params: &sol.family_params,
                h: sol.h,
                mode: sol.mode,
                diagnostics: &sol.diagnostics,
                frames: &sol.frames,
            };
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    emit(job.output.as_deref(), &text)
}

pub fn cmd_list(job: &JobSpec) -> Result<(), CliError> {
    let text = match job.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Entry<'a> {
                name: &'a str,
                params: Vec<&'a str>,
                description: &'a str,
            }
            let fams: Vec<Entry> = BUILTIN_FAMILIES
                .iter()
                .map(|(n, p, d)| Entry { name: n, params: p.to_vec(), description: d })
                .collect();
            let profs: Vec<Entry> = PROFILES
                .iter()
                .map(|(n, p, d)| Entry {
                    name: n,
                    params: p.split(", ").filter(|s| !s.is_empty()).collect(),
                    description: d,
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({ "families": fams, "profiles": profs }))? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("families:\n");
            for (name, params, desc) in BUILTIN_FAMILIES {
                s += &format!("  {name:<12} [{}]  {desc}\n", params.join(", "));
            }
            s += "profiles (wgen):\n";
            for (name, params, desc) in PROFILES {
                s += &format!("  {name:<12} [{params}]  {desc}\n");
            }
            s
        }
    };
    emit(job.output.as_deref(), &text)
}

pub fn cmd_synth(job: &JobSpec) -> Result<(), CliError> {
    let sol = solve(job)?;
    emit_pulse(job, &sol)
}

pub fn cmd_verify(job: &JobSpec) -> Result<(), CliError> {
    if job.h == 0.0 {
        return Err(CliError::Spec("verify needs h > 0 (the h = 0 mode is exact by construction)".into()));
    }
    let sol = solve(job)?;
    let step = sol.grid.uniform_step().unwrap_or_else(|| sol.grid.max_spacing());
    let cfg = PropagatorConfig { step, scheme: Scheme::Cf4, substeps: 1, richardson_check: true, tol: job.tol_verify };
    let report = compare(&sol, &cfg)?;
    emit(job.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "max infidelity {:e} at tau = {} is not below tol_verify {:e}",
            report.max_infidelity, report.worst_infidelity_tau, report.tol_verify
        )))
    }
}

fn profile_of(job: &JobSpec) -> Result<PSpec, CliError> {
    let spec = job
        .profile
        .as_ref()
        .ok_or_else(|| CliError::Spec("wgen needs a profile (--profile NAME)".into()))?;
    let p = spec.build()?;
    let v = wgen::validate_p(&p, 200);
    if !v.passed {
        return Err(CliError::Constraint(format!("profile rejected: {}", wgen::describe_validation(&v))));
    }
    Ok(p)
}

#[derive(Serialize)]
struct WTableJson<'a> {
    profile: &'a str,
    params: &'a BTreeMap<String, f64>,
    end: BranchEnd,
    w_max: f64,
    nodes: Vec<[f64; 2]>,
}

pub fn cmd_wgen(job: &JobSpec) -> Result<(), CliError> {
    let p = profile_of(job)?;
    if job.w_table {
        let table = WTable::build(&p)?;
        let text = match job.format {
            Format::Csv => {
                let mut s = String::from("q,W\n");
                for (q, w) in table.nodes() {
                    s += &row(&[q, w]);
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let doc = WTableJson {
                    profile: p.name(),
                    params: p.params(),
                    end: table.end(),
                    w_max: table.w_max(),
                    nodes: table.nodes().map(|(q, w)| [q, w]).collect(),
                };
                serde_json::to_string_pretty(&doc)? + "\n"
            }
        };
        return emit(job.output.as_deref(), &text);
    }
    if job.h == 0.0 {
        return Err(CliError::Spec("wgen needs h > 0".into()));
    }
    let f = wgen::family_wgen(&p)?;
    let sol = solve_family(job, &f)?;
    emit_pulse(job, &sol)
}

#[derive(Serialize)]
struct UJson {
    re_u11: f64,
    im_u11: f64,
    re_u21: f64,
    im_u21: f64,
}

#[derive(Serialize)]
struct RotateJson {
    family: String,
    params: BTreeMap<String, f64>,
    tau_f: f64,
    t_f: f64,
    u_tot: UJson,
    /// `None` when the net gate is (numerically) the identity.
    rotation: Option<RotationSpec>,
    xz_plane: XzPlaneReport,
    tail_fit: Option<TailFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_fit_error: Option<String>,
}

pub fn cmd_rotate(job: &JobSpec) -> Result<(), CliError> {
    if let Some(t) = job.target {
        let res = rotation::tune_target_rotation(t.nz_sin_half, t.theta)?;
        return emit(job.output.as_deref(), &(serde_json::to_string_pretty(&res)? + "\n"));
    }
    if job.h == 0.0 {
        return Err(CliError::Spec("rotate needs h > 0".into()));
    }
    let f = family_of(&job.family, "rotate (without --target)")?;
    let tau_f = job.tau_f.unwrap_or(DEFAULT_TAU_F);
    if !(tau_f > 0.0) || !tau_f.is_finite() {
        return Err(CliError::Spec(format!("tau_f must be > 0 (got {tau_f})")));
    }
    let grid = TimeGrid::with_step(-tau_f, tau_f, 0.05)?;
    let sol = synthesize(&f, &model_params(job), &grid, job.mode)?;
    let u = rotation::total_evolution(&sol, tau_f)?;
    let xz = rotation::xz_plane_checks(&u, &sol, tau_f)?;
    let (tail_fit, tail_fit_error) = match rotation::tail_fit(&f, (tau_f, tau_f + 2.0 * PI)) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let doc = RotateJson {
        family: f.name().to_string(),
        params: f.params().clone(),
        tau_f,
        t_f: tau_f / job.h,
        u_tot: UJson { re_u11: u.u11.re, im_u11: u.u11.im, re_u21: u.u21.re, im_u21: u.u21.im },
        rotation: u.axis_angle().ok(),
        xz_plane: xz,
        tail_fit,
        tail_fit_error,
    };
    emit(job.output.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    if xz.passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "|tr(U_tot sigma_y)| = {:e} is not zero for an even pulse",
            xz.trace_sigma_y
        )))
    }
}

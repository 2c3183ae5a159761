//! Data files and gnuplot scripts for the four reference figures.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};

use pulseforge::families::{validity_domain_on, FamilySpec};
use pulseforge::params::{ModelParams, TimeGrid};
use pulseforge::rotation::total_evolution;
use pulseforge::synth::{synthesize, BranchMode, PulseSolution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::job::{Figure, JobSpec};
use crate::output::{pulse_csv, row, write_atomic};

/// Default `dτ` for figure data; `--dt` overrides it.
pub const REPRODUCE_DTAU: f64 = 1e-2;
/// Pulled in from each end of a clipped validity interval, in τ.
const CLIP_MARGIN: f64 = 1e-3;
const UTOT_STEP: f64 = 0.05;
pub const THREADS_ENV: &str = "PULSEFORGE_THREADS";
pub const DEFAULT_DIR: &str = "figures";

#[derive(Debug, Clone)]
struct Curve {
    figure: &'static str,
    label: String,
    stem: String,
    family: FamilySpec,
    /// τ range before clipping.
    range: (f64, f64),
    clip: bool,
    utot: bool,
}

fn slug(label: &str) -> String {
    label.replace('/', "over").replace('√', "sqrt").replace('-', "minus").replace('.', "p")
}

fn curve(figure: &'static str, family: &str, param: &str, label: &str, value: f64, range: (f64, f64)) -> Curve {
    Curve {
        figure,
        label: format!("{param} = {label}"),
        stem: format!("{figure}_{family}_{param}_{}", slug(label)),
        family: FamilySpec::new(family, &[(param, value)]),
        range,
        clip: false,
        utot: false,
    }
}

fn curves(fig: Figure) -> Vec<Curve> {
    let mut out = Vec::new();
    if matches!(fig, Figure::Fig1 | Figure::All) {
        for (l, a) in [("0", 0.0), ("2/3", 2.0 / 3.0), ("5/3", 5.0 / 3.0)] {
            out.push(curve("fig1", "sinh_exp", "a", l, a, (-6.0, 6.0)));
        }
        for (l, a) in [("-1", -1.0), ("-1/4", -0.25)] {
            out.push(curve("fig1", "sinh_exp", "a", l, a, (-15.0, 15.0)));
        }
    }
    if matches!(fig, Figure::Fig2 | Figure::All) {
        for (l, b) in [("-1/4", -0.25), ("0", 0.0), ("1/2", 0.5), ("1", 1.0), ("2", 2.0)] {
            let mut c = curve("fig2", "gauss_cos", "b", l, b, (-6.0, 6.0));
            c.utot = true;
            out.push(c);
        }
    }
    if matches!(fig, Figure::Fig3 | Figure::All) {
        let set = [
            ("2√2", 2.0 * SQRT_2),
            ("2", 2.0),
            ("√2", SQRT_2),
            ("1", 1.0),
            ("1/√2", 1.0 / SQRT_2),
            ("0.6", 0.6),
            ("0.5", 0.5),
            ("0.4", 0.4),
            ("0.3", 0.3),
        ];
        for (l, a) in set {
            let mut c = curve("fig3", "tanh", "a", l, a, (-6.0, 6.0));
            c.clip = true;
            out.push(c);
        }
    }
    if matches!(fig, Figure::Fig4 | Figure::All) {
        for (l, a) in [("0.1", 0.1), ("0.5", 0.5)] {
            out.push(curve("fig4", "arctan_trig", "a", l, a, (-4.0 * PI, 4.0 * PI)));
        }
    }
    out
}

/// Outcome of one curve, as listed in `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRecord {
    pub figure: String,
    pub label: String,
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utot_file: Option<String>,
    /// Physical time range actually emitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn clipped_range(c: &Curve) -> Result<(f64, f64), CliError> {
    let (lo, hi) = c.range;
    if !c.clip {
        return Ok((lo, hi));
    }
    let f = c.family.build()?;
    let v = validity_domain_on(&f, lo, hi)?;
    let (a, b) = v
        .origin_interval()
        .ok_or_else(|| CliError::Constraint(format!("no validity interval around t = 0 in [{lo}, {hi}]")))?;
    let a = if a > lo { a + CLIP_MARGIN } else { lo };
    let b = if b < hi { b - CLIP_MARGIN } else { hi };
    if !(b > 0.0 && a < 0.0) {
        return Err(CliError::Constraint(format!(
            "validity interval around t = 0 is too narrow to plot: {}",
            v.describe_intervals()
        )));
    }
    Ok((a, b))
}

fn utot_csv(sol: &PulseSolution, tau_max: f64) -> Result<String, CliError> {
    let mut s = String::from("t_f,Re_u11,Im_u11,Re_u21,Im_u21\n");
    let n = (tau_max / UTOT_STEP).floor() as usize;
    for k in 1..=n {
        let tf = k as f64 * UTOT_STEP;
        let u = total_evolution(sol, tf)?;
        s += &row(&[tf / sol.h, u.u11.re, u.u11.im, u.u21.re, u.u21.im]);
        s.push('\n');
    }
    Ok(s)
}

fn run_curve(c: &Curve, dir: &Path, h: f64, dtau: f64) -> Result<(String, Option<String>, (f64, f64)), CliError> {
    let (lo, hi) = clipped_range(c)?;
    let f = c.family.build()?;
    let grid = TimeGrid::with_step(lo, hi, dtau)?;
    let params = ModelParams { h, ..Default::default() };
    let sol = synthesize(&f, &params, &grid, BranchMode::Literal)?;
    let file = format!("{}.csv", c.stem);
    write_atomic(&dir.join(&file), &pulse_csv(&sol))?;
    let utot = if c.utot {
        let name = format!("{}_utot.csv", c.stem);
        write_atomic(&dir.join(&name), &utot_csv(&sol, hi.min(-lo))?)?;
        Some(name)
    } else {
        None
    };
    Ok((file, utot, (lo / h, hi / h)))
}

fn gnuplot_script(figure: &str, records: &[&CurveRecord]) -> String {
    let title = match figure {
        "fig1" => "sinh_exp family: control J(t)",
        "fig2" => "gauss_cos family: control and evolution operator",
        "fig3" => "tanh family: control J(t) on the validity interval",
        _ => "arctan_trig family: periodic control J(t)",
    };
    let ok: Vec<&&CurveRecord> = records.iter().filter(|r| r.ok).collect();
    let plot = |col: &str, key: &dyn Fn(&CurveRecord) -> Option<String>| -> String {
        let parts: Vec<String> = ok
            .iter()
            .filter_map(|r| key(r).map(|f| format!("'{f}' skip 1 using {col} with lines title '{}'", r.label)))
            .collect();
        if parts.is_empty() {
            "# no curves available\n".to_string()
        } else {
            format!("plot {}\n", parts.join(", \\\n     "))
        }
    };
    let file = |r: &CurveRecord| r.file.clone();
    let utot = |r: &CurveRecord| r.utot_file.clone();
    let mut s = format!("# {title}\nset datafile separator ','\nset key outside right\nset xlabel 't'\n");
    if figure == "fig2" {
        s += "set multiplot layout 2,2 title 'gauss_cos family'\n";
        s += "set ylabel 'J'\n";
        s += &plot("1:2", &file);
        s += "set ylabel 'Re u11'\n";
        s += &plot("1:9", &file);
        s += "set ylabel 'Im u21'\n";
        s += &plot("1:12", &file);
        s += "set xlabel 't_f'\nset ylabel 'Im U_tot,11'\n";
        s += &plot("1:3", &utot);
        s += "unset multiplot\n";
    } else {
        s += &format!("set title '{title}'\nset ylabel 'J'\n");
        s += &plot("1:2", &file);
    }
    s
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Spec(format!("{THREADS_ENV} must be a positive integer (got `{v}`)"))),
        },
    }
}

/// Emits every curve of `figure` into the output directory. Curves that fail
/// are recorded in the manifest and on stderr; the rest are still written.
pub fn cmd_reproduce(job: &JobSpec) -> Result<Vec<CurveRecord>, CliError> {
    let figure = job
        .figure
        .ok_or_else(|| CliError::Spec("reproduce needs --figure (fig1, fig2, fig3, fig4 or all)".into()))?;
    if !(job.h > 0.0) {
        return Err(CliError::Spec("reproduce needs h > 0".into()));
    }
    let h = job.h;
    let dtau = job.grid.dt.map(|d| d * h).unwrap_or(REPRODUCE_DTAU);
    if !(dtau > 0.0) {
        return Err(CliError::Spec(format!("dt must be > 0 (got {dtau})")));
    }
    let dir: PathBuf = job.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DIR));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Spec(format!("cannot create {}: {e}", dir.display())))?;

    let list = curves(figure);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Spec(format!("thread pool: {e}")))?;
    let records: Vec<CurveRecord> = pool.install(|| {
        list.par_iter()
            .map(|c| {
                let base = CurveRecord {
                    figure: c.figure.to_string(),
                    label: c.label.clone(),
                    family: c.family.family.clone(),
                    params: c.family.params.clone(),
                    ok: false,
                    file: None,
                    utot_file: None,
                    t_range: None,
                    error: None,
                };
                match run_curve(c, &dir, h, dtau) {
                    Ok((file, utot_file, t_range)) => CurveRecord {
                        ok: true,
                        file: Some(file),
                        utot_file,
                        t_range: Some(t_range),
                        ..base
                    },
                    Err(e) => CurveRecord { error: Some(e.to_string()), ..base },
                }
            })
            .collect()
    });

    let mut figs: Vec<&str> = records.iter().map(|r| r.figure.as_str()).collect();
    figs.dedup();
    for fig in figs {
        let subset: Vec<&CurveRecord> = records.iter().filter(|r| r.figure == fig).collect();
        write_atomic(&dir.join(format!("{fig}.gp")), &gnuplot_script(fig, &subset))?;
    }
    write_atomic(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&records)? + "\n"))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_sets_match_the_figures() {
        assert_eq!(curves(Figure::Fig1).len(), 5);
        assert_eq!(curves(Figure::Fig2).len(), 5);
        assert_eq!(curves(Figure::Fig3).len(), 9);
        assert_eq!(curves(Figure::Fig4).len(), 2);
        assert_eq!(curves(Figure::All).len(), 21);
        let stems: std::collections::BTreeSet<String> = curves(Figure::All).into_iter().map(|c| c.stem).collect();
        assert_eq!(stems.len(), 21);
        assert!(stems.contains("fig3_tanh_a_1oversqrt2"));
        assert!(stems.contains("fig1_sinh_exp_a_minus1over4"));
    }
}

//! Net gates of even pulses: `U_tot = U(τ_f) U†(−τ_f)`, the asymptotic tail
//! of `q`, and tuning of the Gaussian family to a target rotation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{family_gauss_cos, FamilyError, QFamily};
use crate::numeric::roots::brent;
use crate::params::{ModelParams, TimeGrid};
use crate::su2::{axis_angle, infidelity, Su2Error, Unitary2};
use crate::synth::{synthesize, AnalyticModel, BranchMode, PulseSolution, SynthError};

/// τ_f at which saturated quantities are read off.
pub const SATURATION_TAU: f64 = 5.0;
/// Allowed drift of `Im U_tot,11` over τ_f ∈ [4, 6].
pub const SATURATION_TOL: f64 = 1e-3;
/// Largest spread of the tail coefficients before the window counts as
/// inside the pulse.
pub const TAIL_TOL: f64 = 0.01;
/// Required `|tr(U_tot σ_y)|`.
pub const XZ_TOL: f64 = 1e-8;

const B_MIN: f64 = -0.9;
const B_MAX: f64 = 10.0;
const TAU_F_RANGE: (f64, f64) = (3.0, 10.0);
const TAU_F_SCAN: f64 = 0.05;
const PREFERRED_INFIDELITY: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotationError {
    #[error("family `{0}` is not even; U(t_f)U^dagger(-t_f) only describes the full pulse for even q")]
    NotEven(String),
    #[error("the model does not cover tau = {0}")]
    NoModel(f64),
    #[error("tail window [{lo}, {hi}] is inside the pulse: A, B vary by {residual:e} (> {TAIL_TOL})")]
    WindowInsidePulse { lo: f64, hi: f64, residual: f64 },
    #[error("target {target} is outside the range [{lo:.6}, {hi:.6}] reached by -Im U_tot,11 over b in ({B_MIN}, {B_MAX}]")]
    Unreachable { target: f64, lo: f64, hi: f64 },
    #[error("Im U_tot,11 does not saturate for b = {b}: it varies by {variation:e} over t_f in [4, 6]")]
    NoSaturation { b: f64, variation: f64 },
    #[error("no t_f in [{lo}, {hi}] gives rotation angle {theta}")]
    AngleUnreachable { theta: f64, lo: f64, hi: f64 },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Su2(#[from] Su2Error),
}

fn check_even(f: &QFamily) -> Result<(), RotationError> {
    if f.is_even() {
        Ok(())
    } else {
        Err(RotationError::NotEven(f.name().to_string()))
    }
}

/// `U(τ_f)·U†(−τ_f)` from the pointwise model.
pub fn total_evolution_model(model: &AnalyticModel, tau_f: f64) -> Result<Unitary2, RotationError> {
    check_even(model.family())?;
    let plus = model.unitary_at(tau_f)?;
    let minus = model.unitary_at(-tau_f)?;
    Ok(plus.compose(&minus.dagger()))
}

/// `U(τ_f)·U†(−τ_f)` for a synthesized pulse.
pub fn total_evolution(sol: &PulseSolution, tau_f: f64) -> Result<Unitary2, RotationError> {
    let model = sol.model().ok_or(RotationError::NoModel(tau_f))?;
    total_evolution_model(model, tau_f)
}

/// `q → A cos τ + B sin τ` fitted on a window past the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub a: f64,
    pub b: f64,
    pub window: (f64, f64),
    /// Largest deviation of the pointwise A, B from their means.
    pub residual: f64,
}

impl TailFit {
    /// `A = B = 0` within `tol`: the net gate is an x-rotation.
    pub fn is_x_rotation(&self, tol: f64) -> bool {
        self.a.abs() < tol && self.b.abs() < tol
    }
}

pub fn tail_fit(f: &QFamily, window: (f64, f64)) -> Result<TailFit, RotationError> {
    let (lo, hi) = window;
    let n = 200;
    let mut pts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let s = f.sample(t)?;
        let (sn, cs) = t.sin_cos();
        pts.push((s.q * cs - s.q1 * sn, s.q * sn + s.q1 * cs));
    }
    let m = pts.len() as f64;
    let a = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let b = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let residual = pts.iter().map(|p| (p.0 - a).abs().max((p.1 - b).abs())).fold(0.0, f64::max);
    if residual > TAIL_TOL {
        return Err(RotationError::WindowInsidePulse { lo, hi, residual });
    }
    Ok(TailFit { a, b, window, residual })
}

/// Traces of `U_tot` against σ_y and σ_z, with `sin 2Φ(τ_f) = |z(τ_f)|`
/// alongside for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XzPlaneReport {
    pub tau_f: f64,
    /// `|tr(U_tot σ_y)|`.
    pub trace_sigma_y: f64,
    /// `|tr(U_tot σ_z)|`.
    pub trace_sigma_z: f64,
    pub s2phi_tf: f64,
    /// `|tr(U_tot σ_z)| / sin 2Φ(τ_f)`, when the latter is nonzero.
    pub ratio: Option<f64>,
    pub passed: bool,
}

pub fn xz_plane_checks(u_tot: &Unitary2, sol: &PulseSolution, tau_f: f64) -> Result<XzPlaneReport, RotationError> {
    let model = sol.model().ok_or(RotationError::NoModel(tau_f))?;
    check_even(model.family())?;
    let s2phi = model.sample(tau_f)?.z_norm();
    let ty = u_tot.trace_sigma_y().norm();
    let tz = u_tot.trace_sigma_z().norm();
    Ok(XzPlaneReport {
        tau_f,
        trace_sigma_y: ty,
        trace_sigma_z: tz,
        s2phi_tf: s2phi,
        ratio: (s2phi > 0.0).then(|| tz / s2phi),
        passed: ty < XZ_TOL,
    })
}

/// Tuner output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerResult {
    pub b: f64,
    pub tau_f: f64,
    pub achieved_axis: [f64; 3],
    pub achieved_angle: f64,
    pub infidelity_to_target: f64,
}

fn gauss_model(b: f64, reach: f64) -> Result<AnalyticModel, RotationError> {
    let f = family_gauss_cos(b)?;
    Ok(AnalyticModel::new(&f, &ModelParams::default(), BranchMode::Literal, -reach, reach)?)
}

/// `Im U_tot,11` at the saturation time, or `None` where the Gaussian
/// family is not valid out to it.
fn saturated_im(b: f64) -> Result<Option<f64>, RotationError> {
    let model = match gauss_model(b, SATURATION_TAU) {
        Ok(m) => m,
        Err(RotationError::Synth(_)) | Err(RotationError::Family(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    match total_evolution_model(&model, SATURATION_TAU) {
        Ok(u) => Ok(Some(u.u11.im)),
        Err(RotationError::Synth(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn b_grid() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=38).map(|k| B_MIN + 0.05 * k as f64).collect();
    v.extend((1..=36).map(|k| 1.0 + 0.25 * k as f64));
    v
}

/// Chooses `b` so the saturated `Im U_tot,11 = −target` (with
/// `target = n_z sin(θ/2)`), then `τ_f ∈ [3, 10]` so the angle is θ.
pub fn tune_target_rotation(target: f64, theta: f64) -> Result<TunerResult, RotationError> {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return Err(RotationError::InvalidTarget(format!("angle must lie in (0, 2pi), got {theta}")));
    }
    let nz = target / (0.5 * theta).sin();
    if !(nz.abs() <= 1.0) {
        return Err(RotationError::InvalidTarget(format!("|n_z| = |{target} / sin(theta/2)| exceeds 1")));
    }

    // b scan, roots of Im U_tot,11 + target, smallest |b| wins
    let mut samples = Vec::new();
    for b in b_grid() {
        if let Some(v) = saturated_im(b)? {
            samples.push((b, v + target));
        }
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(_, v)| (l.min(v - target), h.max(v - target)));
    let mut best: Option<f64> = None;
    for w in samples.windows(2) {
        let ((b0, v0), (b1, v1)) = (w[0], w[1]);
        let root = if v0 == 0.0 {
            b0
        } else if v0.signum() != v1.signum() {
            let mut f = |b: f64| -> Result<f64, RotationError> {
                Ok(saturated_im(b)?.map_or(f64::NAN, |v| v + target))
            };
            match brent(&mut f, b0, b1, 1e-12)? {
                Ok(r) => r,
                Err(_) => continue,
            }
        } else {
            continue;
        };
        if best.map_or(true, |b| root.abs() < b.abs()) {
            best = Some(root);
        }
    }
    let b = best.ok_or(RotationError::Unreachable { target, lo: -hi, hi: -lo })?;

    let model = gauss_model(b, TAU_F_RANGE.1)?;
    let ims: Vec<f64> = (0..=20)
        .map(|k| total_evolution_model(&model, 4.0 + 0.1 * k as f64).map(|u| u.u11.im))
        .collect::<Result<_, _>>()?;
    let variation = ims.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ims.iter().cloned().fold(f64::INFINITY, f64::min);
    if variation > SATURATION_TOL {
        return Err(RotationError::NoSaturation { b, variation });
    }

    let target_u = Unitary2::from_axis_angle([(1.0 - nz * nz).max(0.0).sqrt(), 0.0, nz], theta);
    let cos_half = (0.5 * theta).cos();

    // U_tot on a coarse τ_f grid from one synthesis pass
    let (t0, t1) = TAU_F_RANGE;
    let grid = TimeGrid::with_step(-t1, t1, TAU_F_SCAN).map_err(SynthError::from)?;
    let sol = synthesize(&family_gauss_cos(b)?, &ModelParams::default(), &grid, BranchMode::Literal)?;
    let taus = sol.taus();
    let n = taus.len();
    let mid = sol.grid.origin_split();
    let mut crossings = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in mid..n {
        let t = taus[i];
        if t < t0 - 1e-12 {
            continue;
        }
        let u = sol.unitaries[i].compose(&sol.unitaries[n - 1 - i].dagger());
        let v = u.u11.re - cos_half;
        if let Some((tp, vp)) = prev {
            if vp == 0.0 || vp.signum() != v.signum() {
                crossings.push((tp, t));
            }
        }
        prev = Some((t, v));
    }
    let mut chosen: Option<(f64, Unitary2, f64)> = None;
    for (a, c) in crossings {
        let mut f = |t: f64| -> Result<f64, RotationError> {
            Ok(total_evolution_model(&model, t)?.u11.re - cos_half)
        };
        let Ok(tf) = brent(&mut f, a, c, 1e-12)? else { continue };
        let u = total_evolution_model(&model, tf)?;
        let inf = infidelity(&u, &target_u);
        let preferred = inf < PREFERRED_INFIDELITY;
        match &chosen {
            None => chosen = Some((tf, u, inf)),
            Some((_, _, best_inf)) if preferred && *best_inf >= PREFERRED_INFIDELITY => chosen = Some((tf, u, inf)),
            _ => {}
        }
        if preferred {
            break;
        }
    }
    let (tau_f, u, inf) = chosen.ok_or(RotationError::AngleUnreachable { theta, lo: t0, hi: t1 })?;
    let spec = axis_angle(&u)?;
    Ok(TunerResult { b, tau_f, achieved_axis: spec.axis, achieved_angle: spec.angle, infidelity_to_target: inf })
}

//! Numerical oracle: stepwise exact exponentials for `H = b(τ)·σ/2` and
//! residual checks of the rotating-frame equations.
//!
//! The oracle never looks at `F`, `K` or `Φ`; it only consumes `J`, so any
//! disagreement with the analytic operator isolates an error in the
//! analytic construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::TimeGrid;
use crate::su2::{infidelity, Unitary2};
use crate::synth::{PulseSolution, SynthError};

use num_complex::Complex64 as C64;

/// Largest grid spacing accepted by [`ode_residual`].
pub const ODE_MAX_STEP: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("invalid propagator configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "step too large: Richardson error estimate {estimate:e} at tau = {tau} exceeds tolerance {tol:e}"
    )]
    StepTooLarge { tau: f64, estimate: f64, tol: f64 },
    #[error("grid too coarse for the residual check: {0}")]
    GridTooCoarse(String),
    #[error(transparent)]
    Field(#[from] SynthError),
    #[error("solution carries no pointwise control (zero-splitting mode)")]
    NoModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Exponential of the midpoint Hamiltonian, order 2.
    Midpoint,
    /// Two-exponential commutator-free scheme on Gauss nodes, order 4.
    Cf4,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Midpoint => 2,
            Scheme::Cf4 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    /// Nominal step in τ.
    pub step: f64,
    pub scheme: Scheme,
    /// Steps per nominal step.
    pub substeps: usize,
    /// Re-run with twice the substeps and fail on a large Richardson estimate.
    pub richardson_check: bool,
    /// Threshold for the Richardson estimate.
    pub tol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { step: 1e-3, scheme: Scheme::Cf4, substeps: 1, richardson_check: true, tol: 1e-8 }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(VerifyError::InvalidConfig(format!("step must be > 0 (got {})", self.step)));
        }
        if self.substeps == 0 {
            return Err(VerifyError::InvalidConfig("substeps must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(VerifyError::InvalidConfig(format!("tol must be > 0 (got {})", self.tol)));
        }
        Ok(())
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const GAUSS_C1: f64 = 0.5 - SQRT3 / 6.0;
const GAUSS_C2: f64 = 0.5 + SQRT3 / 6.0;
const CF_A1: f64 = 0.25 + SQRT3 / 6.0;
const CF_A2: f64 = 0.25 - SQRT3 / 6.0;

fn one_step<F>(field: &mut F, scheme: Scheme, t: f64, h: f64, u: Unitary2) -> Result<Unitary2, SynthError>
where
    F: FnMut(f64) -> Result<[f64; 3], SynthError>,
{
    match scheme {
        Scheme::Midpoint => {
            let b = field(t + 0.5 * h)?;
            Ok(Unitary2::from_field_step(b, h).compose(&u))
        }
        Scheme::Cf4 => {
            let b1 = field(t + GAUSS_C1 * h)?;
            let b2 = field(t + GAUSS_C2 * h)?;
            let mix = |x: f64, y: f64| [x * b1[0] + y * b2[0], x * b1[1] + y * b2[1], x * b1[2] + y * b2[2]];
            let first = Unitary2::from_field_step(mix(CF_A1, CF_A2), h);
            let second = Unitary2::from_field_step(mix(CF_A2, CF_A1), h);
            Ok(second.compose(&first.compose(&u)))
        }
    }
}

fn run<F>(
    field: &mut F,
    t0: f64,
    u0: Unitary2,
    targets: &[f64],
    step: f64,
    substeps: usize,
    scheme: Scheme,
) -> Result<Vec<Unitary2>, SynthError>
where
    F: FnMut(f64) -> Result<[f64; 3], SynthError>,
{
    let mut out = Vec::with_capacity(targets.len());
    let (mut t, mut u) = (t0, u0);
    for &target in targets {
        let span = target - t;
        if span != 0.0 {
            let n = (span.abs() / step).ceil().max(1.0) as usize * substeps;
            let h = span / n as f64;
            for i in 0..n {
                u = one_step(field, scheme, t + i as f64 * h, h, u)?;
            }
        }
        t = target;
        out.push(u);
    }
    Ok(out)
}

/// Propagates `U(t0) = u0` through `targets` (monotone, all on one side of
/// `t0`) and returns `U` at each target.
pub fn propagate_field<F>(
    field: &mut F,
    t0: f64,
    u0: Unitary2,
    targets: &[f64],
    cfg: &PropagatorConfig,
) -> Result<Vec<Unitary2>, VerifyError>
where
    F: FnMut(f64) -> Result<[f64; 3], SynthError>,
{
    cfg.validate()?;
    let coarse = run(field, t0, u0, targets, cfg.step, cfg.substeps, cfg.scheme)?;
    if cfg.richardson_check {
        let fine = run(field, t0, u0, targets, cfg.step, 2 * cfg.substeps, cfg.scheme)?;
        let denom = ((1u32 << cfg.scheme.order()) - 1) as f64;
        for ((c, f), &t) in coarse.iter().zip(&fine).zip(targets) {
            let estimate = c.distance(f) / denom;
            if estimate > cfg.tol {
                return Err(VerifyError::StepTooLarge { tau: t, estimate, tol: cfg.tol });
            }
        }
    }
    Ok(coarse)
}

/// `U(τ)` on every grid node for an arbitrary field, with `U(0) = I` and
/// propagation outward from τ = 0 in both directions.
pub fn propagate_field_on_grid<F>(
    field: &mut F,
    grid: &TimeGrid,
    cfg: &PropagatorConfig,
) -> Result<Vec<Unitary2>, VerifyError>
where
    F: FnMut(f64) -> Result<[f64; 3], SynthError>,
{
    let taus = grid.taus();
    let split = grid.origin_split();
    let mut out = vec![Unitary2::IDENTITY; taus.len()];
    let fwd = propagate_field(field, 0.0, Unitary2::IDENTITY, &taus[split..], cfg)?;
    out[split..].copy_from_slice(&fwd);
    let back_targets: Vec<f64> = taus[..split].iter().rev().copied().collect();
    let back = propagate_field(field, 0.0, Unitary2::IDENTITY, &back_targets, cfg)?;
    for (k, u) in back.into_iter().enumerate() {
        out[split - 1 - k] = u;
    }
    Ok(out)
}

/// The single-axis problem `H = (J/2)σz + (1/2)σx` in units of `h`.
pub fn propagate_numeric<F>(jh: &mut F, grid: &TimeGrid, cfg: &PropagatorConfig) -> Result<Vec<Unitary2>, VerifyError>
where
    F: FnMut(f64) -> Result<f64, SynthError>,
{
    let mut field = |t: f64| -> Result<[f64; 3], SynthError> { Ok([1.0, 0.0, jh(t)?]) };
    propagate_field_on_grid(&mut field, grid, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeResidual {
    pub max: f64,
    pub worst_tau: f64,
}

/// Residual of `Ḋ± = −i(J/2)e^{±iτ}D∓` with `D± = e^{±iτ/2}(u11 ± u21)/√2`,
/// differentiated by fourth-order central differences.
pub fn ode_residual(sol: &PulseSolution) -> Result<OdeResidual, VerifyError> {
    let taus = sol.taus();
    if taus.len() < 5 {
        return Err(VerifyError::GridTooCoarse(format!("{} nodes, need at least 5", taus.len())));
    }
    let dt = sol.grid.uniform_step().ok_or_else(|| VerifyError::GridTooCoarse("grid is not uniform".into()))?;
    if dt > ODE_MAX_STEP {
        return Err(VerifyError::GridTooCoarse(format!("spacing {dt} exceeds {ODE_MAX_STEP}")));
    }
    let d: Vec<(C64, C64)> = taus
        .iter()
        .zip(&sol.unitaries)
        .map(|(&t, u)| {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            (C64::from_polar(s, 0.5 * t) * (u.u11 + u.u21), C64::from_polar(s, -0.5 * t) * (u.u11 - u.u21))
        })
        .collect();
    let mut worst = OdeResidual { max: 0.0, worst_tau: taus[2] };
    for i in 2..taus.len() - 2 {
        let deriv = |k: fn(&(C64, C64)) -> C64| {
            (k(&d[i - 2]) - 8.0 * k(&d[i - 1]) + 8.0 * k(&d[i + 1]) - k(&d[i + 2])) / (12.0 * dt)
        };
        let dp = deriv(|x| x.0);
        let dm = deriv(|x| x.1);
        let j = sol.frames[i].jh;
        let t = taus[i];
        let rp = dp + C64::new(0.0, 0.5 * j) * C64::from_polar(1.0, t) * d[i].1;
        let rm = dm + C64::new(0.0, 0.5 * j) * C64::from_polar(1.0, -t) * d[i].0;
        let r = rp.norm().max(rm.norm());
        if r > worst.max {
            worst = OdeResidual { max: r, worst_tau: t };
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: String,
    pub params: std::collections::BTreeMap<String, f64>,
    pub scheme: Scheme,
    pub step: f64,
    pub nodes: usize,
    pub max_infidelity: f64,
    pub worst_infidelity_tau: f64,
    /// Largest entry-wise difference between analytic and numeric operators.
    pub max_distance: f64,
    pub max_unitarity_defect: f64,
    pub worst_unitarity_tau: f64,
    /// `None` when the grid does not support the residual check.
    pub max_ode_residual: Option<f64>,
    pub worst_ode_tau: Option<f64>,
    pub tol_verify: f64,
    pub passed: bool,
}

/// Propagates the solution's `J` numerically on its own grid and compares.
pub fn compare(sol: &PulseSolution, cfg: &PropagatorConfig) -> Result<VerificationReport, VerifyError> {
    let model = sol.model().ok_or(VerifyError::NoModel)?;
    let mut jh = |t: f64| model.jh_at(t);
    let numeric = propagate_numeric(&mut jh, &sol.grid, cfg)?;
    let taus = sol.taus();
    let (mut max_inf, mut inf_tau, mut max_dist) = (0.0f64, taus[0], 0.0f64);
    let (mut max_def, mut def_tau) = (0.0f64, taus[0]);
    for ((a, n), &t) in sol.unitaries.iter().zip(&numeric).zip(taus) {
        let inf = infidelity(a, n);
        if inf > max_inf {
            (max_inf, inf_tau) = (inf, t);
        }
        max_dist = max_dist.max(a.distance(n));
        let def = a.unitarity_defect().max(n.unitarity_defect());
        if def > max_def {
            (max_def, def_tau) = (def, t);
        }
    }
    let ode = ode_residual(sol).ok();
    let tol_verify = model.params().tol_verify;
    Ok(VerificationReport {
        family: sol.family.clone(),
        params: sol.family_params.clone(),
        scheme: cfg.scheme,
        step: cfg.step,
        nodes: taus.len(),
        max_infidelity: max_inf,
        worst_infidelity_tau: inf_tau,
        max_distance: max_dist,
        max_unitarity_defect: max_def,
        worst_unitarity_tau: def_tau,
        max_ode_residual: ode.map(|o| o.max),
        worst_ode_tau: ode.map(|o| o.worst_tau),
        tol_verify,
        passed: max_inf < tol_verify,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{family_cos, family_gauss_cos};
    use crate::params::ModelParams;
    use crate::synth::{synthesize, BranchMode};

    fn no_check(step: f64, scheme: Scheme) -> PropagatorConfig {
        PropagatorConfig { step, scheme, substeps: 1, richardson_check: false, tol: 1e-8 }
    }

    #[test]
    fn free_precession_is_exact() {
        let g = TimeGrid::with_step(-3.0, 3.0, 0.1).unwrap();
        let u = propagate_numeric(&mut |_| Ok(0.0), &g, &no_check(0.1, Scheme::Cf4)).unwrap();
        for (t, u) in g.taus().iter().zip(&u) {
            assert!(u.distance(&Unitary2::x_rotation(*t)) < 1e-13);
            assert!(u.unitarity_defect() < 1e-14);
        }
    }

    #[test]
    fn constant_control_matches_rabi_exponential() {
        let j0 = 0.7;
        let g = TimeGrid::with_step(0.0, 5.0, 0.5).unwrap();
        let u = propagate_numeric(&mut |_| Ok(j0), &g, &no_check(0.01, Scheme::Cf4)).unwrap();
        for (t, u) in g.taus().iter().zip(&u) {
            let exact = Unitary2::from_field_step([1.0, 0.0, j0], *t);
            assert!(u.distance(&exact) < 1e-12, "{t}");
        }
    }

    fn self_convergence(scheme: Scheme) -> f64 {
        let f = family_gauss_cos(0.0).unwrap();
        let g = TimeGrid::with_step(-6.0, 6.0, 0.2).unwrap();
        let sol = synthesize(&f, &ModelParams::default(), &g, BranchMode::Literal).unwrap();
        let m = sol.model().unwrap();
        let err = |h: f64| {
            let u = propagate_numeric(&mut |t| m.jh_at(t), &g, &no_check(h, scheme)).unwrap();
            u.iter().zip(&sol.unitaries).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
        };
        let e: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&h| err(h)).collect();
        (e[2] / e[3]).log2()
    }

    #[test]
    fn convergence_orders() {
        let p4 = self_convergence(Scheme::Cf4);
        assert!((p4 - 4.0).abs() < 0.3, "{p4}");
        let p2 = self_convergence(Scheme::Midpoint);
        assert!((p2 - 2.0).abs() < 0.2, "{p2}");
    }

    #[test]
    fn richardson_check_rejects_coarse_steps() {
        let g = TimeGrid::with_step(0.0, 6.0, 0.5).unwrap();
        let f = family_gauss_cos(0.0).unwrap();
        let sol = synthesize(&f, &ModelParams::default(), &g, BranchMode::Literal).unwrap();
        let m = sol.model().unwrap();
        let cfg = PropagatorConfig { step: 0.5, ..Default::default() };
        let r = propagate_numeric(&mut |t| m.jh_at(t), &g, &cfg);
        assert!(matches!(r, Err(VerifyError::StepTooLarge { .. })), "{r:?}");
    }

    #[test]
    fn residual_detects_perturbation() {
        let g = TimeGrid::with_step(-3.0, 3.0, 1e-3).unwrap();
        let mut sol = synthesize(&family_gauss_cos(0.0).unwrap(), &ModelParams::default(), &g, BranchMode::Literal)
            .unwrap();
        let r = ode_residual(&sol).unwrap();
        assert!(r.max < 1e-7, "{r:?}");
        for u in sol.unitaries.iter_mut() {
            u.u21 += C64::new(1e-3, 0.0);
        }
        assert!(ode_residual(&sol).unwrap().max > 1e-4);
    }

    #[test]
    fn residual_requires_fine_uniform_grid() {
        let g = TimeGrid::with_step(-3.0, 3.0, 0.1).unwrap();
        let sol = synthesize(&family_cos(), &ModelParams::default(), &g, BranchMode::Literal).unwrap();
        assert!(matches!(ode_residual(&sol), Err(VerifyError::GridTooCoarse(_))));
    }

    #[test]
    fn cosine_compare_is_exact() {
        let g = TimeGrid::with_step(-6.0, 6.0, 1e-2).unwrap();
        let sol = synthesize(&family_cos(), &ModelParams::default(), &g, BranchMode::Literal).unwrap();
        let rep = compare(&sol, &PropagatorConfig { step: 1e-2, ..Default::default() }).unwrap();
        assert!(rep.max_infidelity < 1e-12 && rep.passed);
        assert!(rep.max_ode_residual.unwrap() < 1e-8);
    }
}

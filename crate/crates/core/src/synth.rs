//! From a generator `q(τ)` to the control `J/h` and the exact evolution
//! operator.
//!
//! With `z = q + i q'` the construction reads
//!
//! ```text
//! F        = arg z                         (unwrapped, F(0) = 0)
//! sin 2Φ   = |z|
//! cos 2Φ   = σ √(1 − q² − q'²)             (σ = +1 unless in signed mode)
//! J/h      = (q'' + q) / cos 2Φ
//! dK/dτ    = q (q'' + q + J/h) / (2|z|²)
//! u11      = e^{i(τ/2 − K)} (e^{iF} cos Φ + sin Φ) / √2
//! u21      = e^{i(τ/2 − K)} (e^{iF} cos Φ − sin Φ) / √2
//! ```
//!
//! `dK/dτ` above is `q(q''+q)/(2|z|²) · (1 + 1/cos 2Φ)` with the bracket
//! multiplied out, which removes the `0/0` at saturation from K entirely.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::validity::{compensated_gap, nearest_event, GAP_NEG_TOL};
use crate::families::{
    validate_initial_conditions, validity_domain_on, FamilyError, QFamily, QSample, ValidityReport,
};
use crate::numeric::quad::adaptive_simpson_with_ends;
use crate::numeric::{richardson_derivatives, wrap_angle};
use crate::params::{ModelParams, ParamError, TimeGrid};
use crate::su2::{infidelity, Unitary2};
use crate::verify::{propagate_field, PropagatorConfig, Scheme};

/// `|z|` below which the phase of `z` is treated as undefined. Localized
/// pulses drive `|z|` far below any fixed small threshold while `arg z`
/// stays well defined, so only a vanishing (or subnormal) `|z|` counts.
pub const ORIGIN_TOL: f64 = f64::MIN_POSITIVE;
/// Tolerated excess of `|z|` over 1.
pub const ENVELOPE_TOL: f64 = 1e-10;
/// Largest τ step used when tracking the phase of `z`.
const PHASE_STEP: f64 = 0.05;
const PHASE_MAX_DEPTH: u32 = 60;
/// Step used for the Richardson differences of `q''` at an event.
const DEGENERATE_GAP: f64 = 1e-8;
const SERIES_H: f64 = 0.02;
/// Half-width of the window propagated when arbitrating a sign in signed mode.
const ARBITRATION_HALF_WIDTH: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(
        "initial conditions q(0) = 1, q'(0) = 0, q''(0) = -1 violated: residuals {residuals:?} (tolerance 1e-9)"
    )]
    InitialConditions { residuals: [f64; 3] },
    #[error("z = q + i q' passes through the origin at tau = {tau}; the phase F is undefined")]
    OriginCrossing { tau: f64 },
    #[error("|z| = {norm} exceeds 1 at tau = {tau}: the constraint q^2 + q'^2 <= 1 is violated")]
    InequalityViolated { tau: f64, norm: f64 },
    #[error(
        "tau = {tau} lies outside the validity domain (1 - q^2 - q'^2 = {gap:e}); valid intervals: {intervals}"
    )]
    OutsideDomain { tau: f64, gap: f64, intervals: String },
    #[error("cos 2Phi vanishes at tau = {tau} while q'' + q = {numerator:e} does not: J diverges")]
    BranchSingular { tau: f64, numerator: f64 },
    #[error("phase tracking failed to resolve z near tau = {tau}")]
    UnwrapFailed { tau: f64 },
    #[error("non-finite {what} at tau = {tau}")]
    NonFinite { tau: f64, what: &'static str },
    #[error("zero-splitting mode: {0}")]
    ZeroSplitting(String),
    #[error("numeric propagation failed: {0}")]
    Oracle(String),
}

/// Sign convention for `cos 2Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchMode {
    /// Positive root everywhere.
    #[default]
    Literal,
    /// The sign may flip at interior saturation events.
    Signed,
}

/// Synthesized quantities at one node. In the zero-splitting mode `tau` is
/// physical time and `jh` is the physical control `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthFrame {
    pub tau: f64,
    pub q: f64,
    pub q1: f64,
    /// Unwrapped `arg(q + i q')`.
    pub f: f64,
    pub s2phi: f64,
    pub c2phi: f64,
    pub k: f64,
    pub jh: f64,
}

impl SynthFrame {
    pub fn unitary(&self) -> Unitary2 {
        frame_unitary(self.tau, self.f, self.k, self.s2phi, self.c2phi)
    }
}

/// `u11, u21` from `(τ, F, K, sin 2Φ, cos 2Φ)` with `Φ ∈ [0, π/2]`.
pub fn frame_unitary(tau: f64, f: f64, k: f64, s2phi: f64, c2phi: f64) -> Unitary2 {
    let r = s2phi.hypot(c2phi);
    let (s, c) = (s2phi / r, c2phi / r);
    // half-angle from the larger of 1 ± cos 2Φ
    let (cos_phi, sin_phi) = if c >= 0.0 {
        let cp = (0.5 * (1.0 + c)).sqrt();
        (cp, 0.5 * s / cp)
    } else {
        let sp = (0.5 * (1.0 - c)).sqrt();
        (0.5 * s / sp, sp)
    };
    let pre = C64::from_polar(FRAC_1_SQRT_2, 0.5 * tau - k);
    let ef = C64::from_polar(cos_phi, f);
    Unitary2::from_parts_unchecked(pre * (ef + sin_phi), pre * (ef - sin_phi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum WindowKind {
    /// `J = sgn(q)·(N₂ + N₃δ + N₄δ²)/√(g₄ + g₅δ + g₆δ²)` about an event with
    /// `q = ±1, q' = 0, q'' = ∓1`.
    Series { s: f64, n: [f64; 3], g: [f64; 3] },
    /// One-sided quadratic extrapolation from the direct formula.
    Extrapolate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EventWindow {
    center: f64,
    kind: WindowKind,
}

/// Per-solution bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub validity: ValidityReport,
    /// `(center, half-width)` of every removable-singularity window.
    pub singular_windows: Vec<(f64, f64)>,
    /// Grid nodes whose J came from a window formula.
    pub window_nodes: usize,
    /// Events at which signed mode flipped the sign of `cos 2Φ`.
    pub branch_flips: Vec<f64>,
    /// `J(0)/h` from the local series.
    pub j0: f64,
}

/// Pointwise access to the analytic solution. Shared by the grid pipeline,
/// the numeric oracle (for `J` at substeps) and the rotation module.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    family: QFamily,
    params: ModelParams,
    mode: BranchMode,
    saturated: bool,
    events: Vec<f64>,
    windows: Vec<EventWindow>,
    /// `signs[i]` applies between `events[i-1]` and `events[i]`.
    signs: Vec<f64>,
    flips: Vec<f64>,
    validity: ValidityReport,
}

/// Restricts a report scanned on a padded range back to `[lo, hi]` (widened to
/// contain τ = 0, as the scan is).
fn trim_report(mut v: ValidityReport, lo: f64, hi: f64) -> ValidityReport {
    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
    v.intervals = v
        .intervals
        .iter()
        .map(|&(a, b)| (a.max(lo), b.min(hi)))
        .filter(|(a, b)| a <= b)
        .collect();
    v.saturation_events.retain(|&e| e >= lo && e <= hi);
    v.scanned = (lo, hi);
    v
}

impl AnalyticModel {
    /// Checks the family and maps its validity domain over `[lo, hi]`.
    pub fn new(
        family: &QFamily,
        params: &ModelParams,
        mode: BranchMode,
        lo: f64,
        hi: f64,
    ) -> Result<Self, SynthError> {
        params.validate()?;
        let ic = validate_initial_conditions(family)?;
        if !ic.pass {
            return Err(SynthError::InitialConditions { residuals: ic.residuals });
        }
        // events just past either end still need their series window
        let pad = 2.0 * params.eps_singular;
        let (validity, events) = match validity_domain_on(family, lo - pad, hi + pad) {
            Ok(v) => {
                let events = v.saturation_events.clone();
                (trim_report(v, lo, hi), events)
            }
            Err(_) => {
                let v = validity_domain_on(family, lo, hi)?;
                let events = v.saturation_events.clone();
                (v, events)
            }
        };
        let saturated = validity.identically_saturated;
        let mut model = AnalyticModel {
            family: family.clone(),
            params: *params,
            mode,
            saturated,
            windows: Vec::new(),
            signs: vec![1.0; events.len() + 1],
            events,
            flips: Vec::new(),
            validity,
        };
        if !saturated {
            model.windows = model
                .events
                .iter()
                .map(|&e| model.build_window(e))
                .collect::<Result<_, _>>()?;
            if mode == BranchMode::Signed {
                model.assign_signs()?;
            }
        }
        Ok(model)
    }

    pub fn family(&self) -> &QFamily {
        &self.family
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mode(&self) -> BranchMode {
        self.mode
    }

    pub fn validity(&self) -> &ValidityReport {
        &self.validity
    }

    pub fn saturation_events(&self) -> &[f64] {
        &self.events
    }

    fn build_window(&self, center: f64) -> Result<EventWindow, SynthError> {
        let p = self.family.sample(center)?;
        let s = p.q.signum();
        let pattern = (p.q.abs() - 1.0).abs() < 1e-9 && p.q1.abs() < 1e-7 && p.curvature().abs() < 1e-6;
        if !pattern {
            return Ok(EventWindow { center, kind: WindowKind::Extrapolate });
        }
        let mut q2 = |t: f64| -> Result<f64, FamilyError> { Ok(self.family.sample(t)?.q2) };
        // derivatives of q'' are q''' … q⁽⁶⁾; expand q = s(1 − δ²/2 + c₄δ⁴ + c₅δ⁵ + c₆δ⁶)
        let d = richardson_derivatives(&mut q2, center, SERIES_H)?;
        let c4 = s * d[1] / 24.0;
        let c5 = s * d[2] / 120.0;
        let c6 = s * d[3] / 720.0;
        let n = [12.0 * c4 - 0.5, 20.0 * c5, c4 + 30.0 * c6];
        let g = [6.0 * c4 - 0.25, 8.0 * c5, 10.0 * c6 + c4 - 16.0 * c4 * c4];
        if g[0].abs() < DEGENERATE_GAP {
            // J(0) = 2√g₄ vanishes; the truncated ratio is 0/0, fall back to the sides
            return Ok(EventWindow { center, kind: WindowKind::Extrapolate });
        }
        if !(g[0] > 0.0) {
            return Err(SynthError::BranchSingular { tau: center, numerator: n[0] });
        }
        Ok(EventWindow { center, kind: WindowKind::Series { s, n, g } })
    }

    fn sigma(&self, tau: f64) -> f64 {
        let i = self.events.partition_point(|&e| e < tau);
        self.signs[i]
    }

    /// Sign on the side of `center` where `tau` lies (right side at the event).
    fn sigma_near(&self, center: f64, tau: f64) -> f64 {
        let i = self.events.partition_point(|&e| e <= center);
        if tau >= center {
            self.signs[i]
        } else {
            self.signs[i - 1]
        }
    }

    fn window_at(&self, tau: f64) -> Option<&EventWindow> {
        let eps = self.params.eps_singular;
        self.windows
            .iter()
            .filter(|w| (tau - w.center).abs() <= eps)
            .min_by(|a, b| (tau - a.center).abs().total_cmp(&(tau - b.center).abs()))
    }

    pub fn sample(&self, tau: f64) -> Result<QSample, SynthError> {
        Ok(self.family.sample(tau)?)
    }

    /// `1 − q² − q'²`, compensated near saturation events.
    pub fn gap(&self, tau: f64) -> Result<f64, SynthError> {
        Ok(compensated_gap(&self.family, tau, &self.events)?)
    }

    /// Signed `cos 2Φ`.
    pub fn c2phi_at(&self, tau: f64) -> Result<f64, SynthError> {
        if self.saturated {
            return Ok(0.0);
        }
        let g = self.gap(tau)?;
        self.check_gap(tau, g)?;
        Ok(self.sigma(tau) * g.max(0.0).sqrt())
    }

    fn check_gap(&self, tau: f64, g: f64) -> Result<(), SynthError> {
        let tol = if nearest_event(&self.events, tau).is_some() { GAP_NEG_TOL } else { 1e-10 };
        if g < -tol {
            return Err(SynthError::OutsideDomain {
                tau,
                gap: g,
                intervals: self.validity.describe_intervals(),
            });
        }
        Ok(())
    }

    fn jh_direct(&self, p: &QSample) -> Result<f64, SynthError> {
        let tau = p.tau;
        let g = self.gap(tau)?;
        self.check_gap(tau, g)?;
        let n = p.curvature();
        let c = self.sigma(tau) * g.max(0.0).sqrt();
        if c == 0.0 {
            if n == 0.0 {
                return Ok(0.0);
            }
            return Err(SynthError::BranchSingular { tau, numerator: n });
        }
        Ok(n / c)
    }

    fn jh_window(&self, w: &EventWindow, tau: f64) -> Result<f64, SynthError> {
        let delta = tau - w.center;
        let sigma = self.sigma_near(w.center, tau);
        match w.kind {
            WindowKind::Series { s, n, g } => {
                let num = n[0] + delta * (n[1] + delta * n[2]);
                let den = (g[0] + delta * (g[1] + delta * g[2])).sqrt();
                Ok(sigma * s * num / den)
            }
            WindowKind::Extrapolate => {
                let eps = self.params.eps_singular;
                let side = if delta >= 0.0 { 1.0 } else { -1.0 };
                let mut v = [0.0; 3];
                for (k, vk) in v.iter_mut().enumerate() {
                    let t = w.center + side * eps * (k + 1) as f64;
                    *vk = self.jh_direct(&self.family.sample(t)?)?;
                }
                // quadratic through x = 1, 2, 3 evaluated at x = |δ|/eps
                let x = delta.abs() / eps;
                let l1 = (x - 2.0) * (x - 3.0) / 2.0;
                let l2 = -(x - 1.0) * (x - 3.0);
                let l3 = (x - 1.0) * (x - 2.0) / 2.0;
                Ok(l1 * v[0] + l2 * v[1] + l3 * v[2])
            }
        }
    }

    fn jh_from_sample(&self, p: &QSample) -> Result<f64, SynthError> {
        if self.saturated {
            return Ok(0.0);
        }
        match self.window_at(p.tau) {
            Some(w) => self.jh_window(w, p.tau),
            None => self.jh_direct(p),
        }
    }

    /// `J/h` at `τ`.
    pub fn jh_at(&self, tau: f64) -> Result<f64, SynthError> {
        let p = self.family.sample(tau)?;
        let j = self.jh_from_sample(&p)?;
        if !j.is_finite() {
            return Err(SynthError::NonFinite { tau, what: "J" });
        }
        Ok(j)
    }

    /// `dK/dτ`.
    pub fn kdot_at(&self, tau: f64) -> Result<f64, SynthError> {
        if self.saturated {
            return Ok(0.0);
        }
        let p = self.family.sample(tau)?;
        let j = self.jh_from_sample(&p)?;
        let r = p.z_norm();
        if r < ORIGIN_TOL {
            return Err(SynthError::OriginCrossing { tau });
        }
        // scaled by |z| separately; |z|² underflows in pulse tails
        Ok(0.5 * (p.q / r) * ((p.curvature() + j) / r))
    }

    /// Returns `F(b)` given `F(a) = fa`, tracking `arg z` with steps no
    /// larger than [`PHASE_STEP`] and bisecting any step whose increment
    /// reaches π/2.
    pub fn advance_phase(&self, a: f64, fa: f64, b: f64) -> Result<f64, SynthError> {
        let raw = |t: f64| -> Result<f64, SynthError> {
            let p = self.family.sample(t)?;
            let r = p.z_norm();
            if r < ORIGIN_TOL {
                return Err(SynthError::OriginCrossing { tau: t });
            }
            if r > 1.0 + ENVELOPE_TOL {
                return Err(SynthError::InequalityViolated { tau: t, norm: r });
            }
            Ok(p.q1.atan2(p.q))
        };
        let n = ((b - a).abs() / PHASE_STEP).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let mut f = fa;
        let mut prev = raw(a)?;
        for i in 0..n {
            let t0 = a + i as f64 * h;
            let t1 = if i + 1 == n { b } else { t0 + h };
            let (df, last) = self.phase_increment(&raw, t0, prev, t1, PHASE_MAX_DEPTH)?;
            f += df;
            prev = last;
        }
        Ok(f)
    }

    fn phase_increment(
        &self,
        raw: &impl Fn(f64) -> Result<f64, SynthError>,
        t0: f64,
        r0: f64,
        t1: f64,
        depth: u32,
    ) -> Result<(f64, f64), SynthError> {
        let r1 = raw(t1)?;
        let d = wrap_angle(r1 - r0);
        if d.abs() < std::f64::consts::FRAC_PI_2 {
            return Ok((d, r1));
        }
        if depth == 0 {
            return Err(SynthError::UnwrapFailed { tau: t0 });
        }
        let m = 0.5 * (t0 + t1);
        let (d1, rm) = self.phase_increment(raw, t0, r0, m, depth - 1)?;
        let (d2, r1) = self.phase_increment(raw, m, rm, t1, depth - 1)?;
        Ok((d1 + d2, r1))
    }

    /// `∫_a^b dK/dτ` with endpoint values supplied.
    fn integrate_k(&self, a: f64, b: f64, ka: f64, kb: f64) -> Result<f64, SynthError> {
        let tol = self.params.tol_quad * (b - a).abs().max(1e-300);
        let mut f = |t: f64| self.kdot_at(t);
        adaptive_simpson_with_ends(&mut f, a, b, ka, kb, tol)
    }

    /// Full frame at `τ`, computing `F` and `K` from τ = 0.
    pub fn frame_at(&self, tau: f64) -> Result<SynthFrame, SynthError> {
        let f = self.advance_phase(0.0, 0.0, tau)?;
        let mut k = 0.0;
        if !self.saturated && tau != 0.0 {
            let n = tau.abs().ceil().max(1.0) as usize;
            let h = tau / n as f64;
            let mut kd0 = self.kdot_at(0.0)?;
            for i in 0..n {
                let (t0, t1) = (i as f64 * h, if i + 1 == n { tau } else { (i + 1) as f64 * h });
                let kd1 = self.kdot_at(t1)?;
                k += self.integrate_k(t0, t1, kd0, kd1)?;
                kd0 = kd1;
            }
        }
        self.assemble(tau, f, k)
    }

    fn assemble(&self, tau: f64, f: f64, k: f64) -> Result<SynthFrame, SynthError> {
        let p = self.family.sample(tau)?;
        let s2phi = p.z_norm();
        if s2phi > 1.0 + ENVELOPE_TOL {
            return Err(SynthError::InequalityViolated { tau, norm: s2phi });
        }
        let c2phi = self.c2phi_at(tau)?;
        let jh = self.jh_from_sample(&p)?;
        if !jh.is_finite() || !k.is_finite() || !f.is_finite() {
            return Err(SynthError::NonFinite { tau, what: "frame" });
        }
        Ok(SynthFrame { tau, q: p.q, q1: p.q1, f, s2phi: s2phi.min(1.0), c2phi, k, jh })
    }

    /// `U(τ)` evaluated from τ = 0.
    pub fn unitary_at(&self, tau: f64) -> Result<Unitary2, SynthError> {
        Ok(self.frame_at(tau)?.unitary())
    }

    /// Signed mode: walk outward from τ = 0 and decide the sign past each
    /// interior event.
    fn assign_signs(&mut self) -> Result<(), SynthError> {
        let origin = self.events.partition_point(|&e| e < 0.0);
        // right of 0: events[origin+1..], segment after events[i] is signs[i+1]
        for i in origin + 1..self.events.len() {
            self.signs[i + 1] = self.signs[i];
            if self.should_flip(i, 1.0)? {
                self.signs[i + 1] = -self.signs[i];
                self.flips.push(self.events[i]);
            }
        }
        for i in (0..origin).rev() {
            self.signs[i] = self.signs[i + 1];
            if self.should_flip(i, -1.0)? {
                self.signs[i] = -self.signs[i + 1];
                self.flips.push(self.events[i]);
            }
        }
        self.flips.sort_by(f64::total_cmp);
        Ok(())
    }

    /// Order-2 touching zeros flip (the signed root is then smooth); higher
    /// orders are arbitrated by propagating a short window numerically.
    fn should_flip(&self, i: usize, dir: f64) -> Result<bool, SynthError> {
        let e = self.events[i];
        let d = 0.02;
        let g1 = self.gap(e + dir * d)?;
        let g2 = self.gap(e + dir * 2.0 * d)?;
        if g1 > 0.0 && g2 / g1 < 8.0 {
            return Ok(true);
        }
        let w = ARBITRATION_HALF_WIDTH;
        let (a, b) = (e - dir * w, e + dir * w);
        let mut best = (f64::INFINITY, false);
        for flip in [false, true] {
            let mut cand = self.clone();
            let (near, far) = if dir > 0.0 { (i, i + 1) } else { (i + 1, i) };
            cand.signs[far] = if flip { -cand.signs[near] } else { cand.signs[near] };
            let ua = cand.unitary_at(a)?;
            let ub = cand.unitary_at(b)?;
            let cfg = PropagatorConfig { step: 1e-3, scheme: Scheme::Cf4, substeps: 1, richardson_check: false, tol: 1e-8 };
            let mut field = |t: f64| -> Result<[f64; 3], SynthError> { Ok([1.0, 0.0, cand.jh_at(t)?]) };
            let un = propagate_field(&mut field, a, ua, &[b], &cfg).map_err(|e| match e {
                crate::verify::VerifyError::Field(err) => err,
                other => SynthError::Oracle(other.to_string()),
            })?;
            let err = infidelity(&un[0], &ub);
            if err < best.0 {
                best = (err, flip);
            }
        }
        Ok(best.1)
    }
}

/// A synthesized pulse on a grid.
#[derive(Debug, Clone)]
pub struct PulseSolution {
    pub grid: TimeGrid,
    pub frames: Vec<SynthFrame>,
    pub unitaries: Vec<Unitary2>,
    /// Family name and parameters.
    pub family: String,
    pub family_params: std::collections::BTreeMap<String, f64>,
    /// Physical splitting used for unit restoration.
    pub h: f64,
    pub mode: BranchMode,
    pub diagnostics: Diagnostics,
    model: Option<AnalyticModel>,
}

impl PulseSolution {
    /// Pointwise model behind the solution; `None` in the zero-splitting mode.
    pub fn model(&self) -> Option<&AnalyticModel> {
        self.model.as_ref()
    }

    pub fn taus(&self) -> &[f64] {
        self.grid.taus()
    }

    pub fn jh(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.jh).collect()
    }

    /// Control `J` at a node, in the physical units of `h`.
    pub fn j_physical(&self, i: usize) -> f64 {
        if self.h == 0.0 {
            self.frames[i].jh
        } else {
            self.h * self.frames[i].jh
        }
    }

    /// Physical time of a node.
    pub fn t_physical(&self, i: usize) -> f64 {
        if self.h == 0.0 {
            self.frames[i].tau
        } else {
            self.frames[i].tau / self.h
        }
    }
}

/// Runs the full pipeline on `grid` (τ units). The grid must stay inside the
/// validity interval containing τ = 0.
pub fn synthesize(
    f: &QFamily,
    params: &ModelParams,
    grid: &TimeGrid,
    mode: BranchMode,
) -> Result<PulseSolution, SynthError> {
    let model = AnalyticModel::new(f, params, mode, grid.first(), grid.last())?;
    let taus = grid.taus();
    if !model.saturated {
        let (lo, hi) = model.validity.origin_interval().unwrap_or((0.0, 0.0));
        if let Some(&t) = taus.iter().find(|&&t| t < lo || t > hi) {
            return Err(SynthError::OutsideDomain {
                tau: t,
                gap: model.gap(t).unwrap_or(f64::NAN),
                intervals: model.validity.describe_intervals(),
            });
        }
    }

    let n = taus.len();
    let split = grid.origin_split();
    let mut fs = vec![0.0; n];
    let mut ks = vec![0.0; n];
    let kd: Vec<f64> = taus.iter().map(|&t| model.kdot_at(t)).collect::<Result<_, _>>()?;
    let kd0 = model.kdot_at(0.0)?;

    // forward from 0 over nodes with τ >= 0, backward over τ < 0
    let (mut tp, mut fp, mut kp, mut kdp) = (0.0, 0.0, 0.0, kd0);
    for i in split..n {
        let t = taus[i];
        fs[i] = model.advance_phase(tp, fp, t)?;
        ks[i] = kp + if model.saturated { 0.0 } else { model.integrate_k(tp, t, kdp, kd[i])? };
        (tp, fp, kp, kdp) = (t, fs[i], ks[i], kd[i]);
    }
    let (mut tp, mut fp, mut kp, mut kdp) = (0.0, 0.0, 0.0, kd0);
    for i in (0..split).rev() {
        let t = taus[i];
        fs[i] = model.advance_phase(tp, fp, t)?;
        ks[i] = kp + if model.saturated { 0.0 } else { model.integrate_k(tp, t, kdp, kd[i])? };
        (tp, fp, kp, kdp) = (t, fs[i], ks[i], kd[i]);
    }

    let frames: Vec<SynthFrame> = (0..n)
        .map(|i| model.assemble(taus[i], fs[i], ks[i]))
        .collect::<Result<_, _>>()?;
    let unitaries = frames.iter().map(SynthFrame::unitary).collect();
    let window_nodes = taus.iter().filter(|&&t| model.window_at(t).is_some()).count();
    let diagnostics = Diagnostics {
        validity: model.validity.clone(),
        singular_windows: model.windows.iter().map(|w| (w.center, params.eps_singular)).collect(),
        window_nodes,
        branch_flips: model.flips.clone(),
        j0: model.jh_at(0.0)?,
    };
    Ok(PulseSolution {
        grid: grid.clone(),
        frames,
        unitaries,
        family: f.name().to_string(),
        family_params: f.params().clone(),
        h: params.h,
        mode,
        diagnostics,
        model: Some(model),
    })
}

/// `h = 0`: `H = (J/2)σz`, so `U = diag(e^{−iK}, e^{iK})` with `K = ½∫₀ᵗ J`.
/// Here the grid is in physical time and `j` is the physical control.
pub fn synthesize_zero_splitting(
    j: &dyn Fn(f64) -> f64,
    grid: &TimeGrid,
    tol_quad: f64,
) -> Result<PulseSolution, SynthError> {
    if !(tol_quad > 0.0) {
        return Err(ParamError::NonPositiveTolerance { name: "tol_quad", value: tol_quad }.into());
    }
    let taus = grid.taus();
    let mut half = |t: f64| -> Result<f64, SynthError> {
        let v = 0.5 * j(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SynthError::NonFinite { tau: t, what: "J" })
        }
    };
    let mut frames = Vec::with_capacity(taus.len());
    let mut unitaries = Vec::with_capacity(taus.len());
    for &t in taus {
        let k = crate::numeric::quad::adaptive_simpson(&mut half, 0.0, t, tol_quad * t.abs().max(1.0))?;
        frames.push(SynthFrame { tau: t, q: 1.0, q1: 0.0, f: 0.0, s2phi: 1.0, c2phi: 0.0, k, jh: j(t) });
        unitaries.push(Unitary2::from_parts_unchecked(C64::from_polar(1.0, -k), C64::new(0.0, 0.0)));
    }
    let validity = ValidityReport {
        intervals: vec![(grid.first(), grid.last())],
        saturation_events: vec![],
        identically_saturated: false,
        localized: false,
        positive: frames.iter().all(|f| f.jh >= 0.0),
        bounded: true,
        scanned: (grid.first(), grid.last()),
    };
    Ok(PulseSolution {
        grid: grid.clone(),
        unitaries,
        family: "zero_splitting".into(),
        family_params: Default::default(),
        h: 0.0,
        mode: BranchMode::Literal,
        diagnostics: Diagnostics {
            validity,
            singular_windows: vec![],
            window_nodes: 0,
            branch_flips: vec![],
            j0: j(0.0),
        },
        frames,
        model: None,
    })
}

/// Two-axis form of a solution: x-field `1 − ω` and the control rotating in
/// the y–z plane at frequency `ω` (all in units of `h`). Shifting the x-field
/// by `+ω` in the frame rotating with the drive recovers the single-axis
/// problem, so `U_two(τ) = exp(+iωτσx/2) · U(τ)`.
#[derive(Debug, Clone)]
pub struct TwoAxisControl {
    pub omega: f64,
    /// Constant x-field, `1 − ω`.
    pub hx: f64,
    pub taus: Vec<f64>,
    /// z component `J cos ωτ`.
    pub jz: Vec<f64>,
    /// y component `J sin ωτ`.
    pub jy: Vec<f64>,
    pub unitaries: Vec<Unitary2>,
    model: Option<AnalyticModel>,
}

impl TwoAxisControl {
    /// Field vector `(b_x, b_y, b_z)` at τ, with `H = b·σ/2`.
    pub fn field_at(&self, tau: f64) -> Result<[f64; 3], SynthError> {
        let j = match &self.model {
            Some(m) => m.jh_at(tau)?,
            None => return Err(SynthError::ZeroSplitting("two-axis lift needs h > 0".into())),
        };
        let (s, c) = (self.omega * tau).sin_cos();
        Ok([self.hx, j * s, j * c])
    }
}

pub fn two_axis_lift(sol: &PulseSolution, omega: f64) -> TwoAxisControl {
    let taus = sol.taus().to_vec();
    let mut jz = Vec::with_capacity(taus.len());
    let mut jy = Vec::with_capacity(taus.len());
    let mut unitaries = Vec::with_capacity(taus.len());
    for (i, &t) in taus.iter().enumerate() {
        let (s, c) = (omega * t).sin_cos();
        let j = sol.frames[i].jh;
        jz.push(j * c);
        jy.push(j * s);
        let frame = Unitary2::x_rotation(-omega * t);
        unitaries.push(frame.compose(&sol.unitaries[i]));
    }
    TwoAxisControl { omega, hx: 1.0 - omega, taus, jz, jy, unitaries, model: sol.model.clone() }
}

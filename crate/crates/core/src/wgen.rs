//! Generators from a velocity profile: choose `P(q)`, integrate
//! `τ = W(q) = ∫_q^1 dq'/√P(q')`, and invert to get `q(τ)`.
//!
//! Any `P` with `0 ≤ P ≤ 1 − q²`, `P(1) = 0` and `P'(1) = −2` gives a
//! generator that satisfies the initial conditions and stays inside the unit
//! disk by construction (`1 − q² − q'² = 1 − q² − P ≥ 0`).
//!
//! Internally the profile is evaluated in `x = 1 − q` so that the square-root
//! singularity at `q = 1` can be resolved without cancellation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{FamilyError, Parity, QEvaluator, QFamily, QSample};
use crate::numeric::quad::{adaptive_gk, gauss_legendre};
use crate::numeric::roots::{bisect, brent};

/// Nodes of the base grid, cosine-clustered toward `q = 1`.
pub const TABLE_NODES: usize = 2048;
/// Largest W increment allowed between neighbouring table nodes.
pub const MAX_W_STEP: f64 = 0.05;
/// `|P'(q*)|` below this makes a zero a double zero.
pub const DOUBLE_ZERO_TOL: f64 = 1e-8;
/// Below this τ the inverse uses `q = 1 − τ²/2`.
pub const SERIES_TAU: f64 = 1e-4;
/// Tables approaching a double zero stop once W exceeds this.
pub const ASYMPTOTE_W: f64 = 60.0;

const ZERO_SCAN: usize = 4096;
const INVERT_TOL: f64 = 1e-13;
const BOUND_SLACK: f64 = 1e-12;
const DIFF_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WgenError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("W diverges: P has a zero of order >= 2 at q = {q_zero}, which q only reaches asymptotically")]
    NonIntegrable { q_zero: f64 },
    #[error("q = {q} lies outside the profile domain [{q_lo}, 1]")]
    OutsideProfile { q: f64, q_lo: f64 },
    #[error("tau = {tau} is beyond the tabulated branch (W <= {w_max}); continue through the turning point first")]
    OutOfRange { tau: f64, w_max: f64 },
    #[error("P has a zero of order >= 2 at q = {q_star}; q approaches it in infinite time and cannot be continued")]
    StuckAtZero { q_star: f64 },
    #[error("q = {q} is not a zero of P on this branch (P = {p:e})")]
    NotTurningPoint { q: f64, p: f64 },
    #[error("P <= 0 inside the integration range at q = {0}")]
    NonPositive(f64),
    #[error("{0}")]
    Root(String),
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    Circle,
    TanhSq { a: f64 },
    ArctanTrig { a: f64, q_min: f64 },
    /// Coefficients in powers of `q`, of `x = 1 − q`, and of `x` for `q + P'/2`.
    Polynomial { coeffs: Vec<f64>, shifted: Vec<f64>, curvature: Vec<f64> },
    Custom { p: Scalar, p1: Scalar },
}

/// A velocity profile `P(q)` with its derivative, on `[q_min, 1]`.
#[derive(Clone)]
pub struct PSpec {
    name: String,
    params: BTreeMap<String, f64>,
    profile: Profile,
    q_min: f64,
}

impl fmt::Debug for PSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PSpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("q_min", &self.q_min)
            .finish()
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect()
}

/// Coefficients of `p(1 − x)` in powers of `x`.
fn shift_to_top(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // (1 − x)^k = Σ_j C(k, j) (−x)^j
    for (k, &ck) in c.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out[j] += ck * binom * sign;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

impl PSpec {
    /// `P = 1 − q²`, which generates `q = cos τ`.
    pub fn circle() -> Self {
        PSpec { name: "circle".into(), params: BTreeMap::new(), profile: Profile::Circle, q_min: -1.0 }
    }

    /// `P = 2(1 − q)(1 − 2a²(1 − q))²`, which generates
    /// `q = 1 − tanh²(aτ)/(2a²)`.
    pub fn tanh_sq(a: f64) -> Result<Self, WgenError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(WgenError::InvalidProfile(format!("tanh_sq needs a > 0 (got {a})")));
        }
        let q_min = (1.0 - 0.5 / (a * a)).max(-1.0);
        Ok(PSpec {
            name: "tanh_sq".into(),
            params: [("a".to_string(), a)].into_iter().collect(),
            profile: Profile::TanhSq { a },
            q_min,
        })
    }

    /// The profile implied by `q = (1/a) tan(arctan a − (2a/(1+a²)) sin²(τ/2))`.
    /// Its lower edge is a simple zero, so the generated `q` is periodic.
    pub fn arctan_trig(a: f64) -> Result<Self, WgenError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(WgenError::InvalidProfile(format!("arctan_trig needs a > 0 (got {a})")));
        }
        let k = 2.0 * a / (1.0 + a * a);
        let q_min = (a.atan() - k).tan() / a;
        Ok(PSpec {
            name: "arctan_trig".into(),
            params: [("a".to_string(), a)].into_iter().collect(),
            profile: Profile::ArctanTrig { a, q_min },
            q_min,
        })
    }

    /// `P = Σ c_k q^k` on `[q_min, 1]`.
    pub fn polynomial(coeffs: Vec<f64>, q_min: f64) -> Result<Self, WgenError> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(WgenError::InvalidProfile("polynomial needs finite coefficients".into()));
        }
        if !(q_min >= -1.0 && q_min < 1.0) {
            return Err(WgenError::InvalidProfile(format!("q_min must lie in [-1, 1) (got {q_min})")));
        }
        let shifted = shift_to_top(&coeffs);
        // q + P'(q)/2 with P'(q) = −dP/dx
        let mut curvature: Vec<f64> = derivative(&shifted).iter().map(|d| -0.5 * d).collect();
        curvature.resize(curvature.len().max(2), 0.0);
        curvature[0] += 1.0;
        curvature[1] -= 1.0;
        let params = coeffs.iter().enumerate().map(|(k, &c)| (format!("c{k}"), c)).collect();
        Ok(PSpec {
            name: "polynomial".into(),
            params,
            profile: Profile::Polynomial { coeffs, shifted, curvature },
            q_min,
        })
    }

    /// Arbitrary `P` and `P'` as closures.
    pub fn custom(
        name: impl Into<String>,
        p: impl Fn(f64) -> f64 + Send + Sync + 'static,
        p1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q_min: f64,
    ) -> Result<Self, WgenError> {
        if !(q_min >= -1.0 && q_min < 1.0) {
            return Err(WgenError::InvalidProfile(format!("q_min must lie in [-1, 1) (got {q_min})")));
        }
        Ok(PSpec {
            name: name.into(),
            params: BTreeMap::new(),
            profile: Profile::Custom { p: Arc::new(p), p1: Arc::new(p1) },
            q_min,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn p(&self, q: f64) -> f64 {
        match &self.profile {
            Profile::Circle => (1.0 - q) * (1.0 + q),
            Profile::Polynomial { coeffs, .. } => horner(coeffs, q),
            Profile::Custom { p, .. } => p(q),
            _ => self.p_top(1.0 - q),
        }
    }

    /// `dP/dq`.
    pub fn p1(&self, q: f64) -> f64 {
        match &self.profile {
            Profile::Circle => -2.0 * q,
            Profile::TanhSq { a } => {
                let x = 1.0 - q;
                let a2 = a * a;
                -2.0 * (1.0 - 2.0 * a2 * x) * (1.0 - 6.0 * a2 * x)
            }
            Profile::ArctanTrig { a, q_min } => {
                let (ym, yp, r) = arctan_parts(*a, *q_min, 1.0 - q);
                let y = 0.5 * (yp - ym);
                let r1 = 2.0 * a * a * q / (1.0 + a * a);
                -2.0 * y * r + 2.0 * ym * yp * r * r1
            }
            Profile::Polynomial { coeffs, .. } => horner(&derivative(coeffs), q),
            Profile::Custom { p1, .. } => p1(q),
        }
    }

    /// `P(1 − x)`, accurate in relative terms for small `x`.
    pub fn p_top(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Circle => x * (2.0 - x),
            Profile::TanhSq { a } => {
                let w = 1.0 - 2.0 * a * a * x;
                2.0 * x * w * w
            }
            Profile::ArctanTrig { a, q_min } => {
                let (ym, yp, r) = arctan_parts(*a, *q_min, x);
                ym * yp * r * r
            }
            // the shifted form is only needed near q = 1
            Profile::Polynomial { shifted, .. } if x < 0.5 => horner(shifted, x),
            Profile::Polynomial { coeffs, .. } => horner(coeffs, 1.0 - x),
            Profile::Custom { p, .. } => p(1.0 - x),
        }
    }

    /// `q + P'(q)/2 = q + q''` at `q = 1 − x`.
    pub fn curvature_top(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Circle => 0.0,
            Profile::TanhSq { a } => {
                let a2 = a * a;
                x * (8.0 * a2 - 1.0) - 12.0 * a2 * a2 * x * x
            }
            Profile::Polynomial { curvature, .. } => horner(curvature, x),
            _ => (1.0 - x) + 0.5 * self.p1(1.0 - x),
        }
    }
}

/// `(1 − y, 1 + y, r)` with `P = (1 − y²) r²` for the arctan profile at
/// `q = 1 − x`. Both factors are formed as arctangent differences so they
/// keep full relative accuracy at their zeros `q = 1` and `q = q_min`.
fn arctan_parts(a: f64, q_min: f64, x: f64) -> (f64, f64, f64) {
    let q = 1.0 - x;
    let s = a + 1.0 / a;
    // arctan a − arctan(aq) and arctan(aq) − arctan(a q_min)
    let ym = s * (a * x).atan2(1.0 + a * a * q);
    let yp = s * (a * (q - q_min)).atan2(1.0 + a * a * q * q_min);
    let r = (1.0 + a * a * q * q) / (1.0 + a * a);
    (ym, yp, r)
}

/// Serialized profile selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum ProfileSpec {
    Circle,
    TanhSq { a: f64 },
    ArctanTrig { a: f64 },
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default)]
        q_min: Option<f64>,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<PSpec, WgenError> {
        match self {
            ProfileSpec::Circle => Ok(PSpec::circle()),
            ProfileSpec::TanhSq { a } => PSpec::tanh_sq(*a),
            ProfileSpec::ArctanTrig { a } => PSpec::arctan_trig(*a),
            ProfileSpec::Polynomial { coeffs, q_min } => PSpec::polynomial(coeffs.clone(), q_min.unwrap_or(-1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValidation {
    pub passed: bool,
    /// Points where `0 ≤ P ≤ 1 − q²` fails.
    pub violations: Vec<f64>,
    pub p_at_one: f64,
    /// One-sided difference estimate of `P'(1)`.
    pub dp_at_one: f64,
    pub checked: usize,
}

/// Checks the profile bounds at `n_check` Chebyshev points plus the boundary
/// conditions at `q = 1`.
pub fn validate_p(p: &PSpec, n_check: usize) -> PValidation {
    let (lo, hi) = (p.q_min, 1.0);
    let mut violations = Vec::new();
    for k in 0..n_check {
        let q = 0.5 * (lo + hi) + 0.5 * (hi - lo) * (PI * (k as f64 + 0.5) / n_check as f64).cos();
        let x = 1.0 - q;
        let v = p.p_top(x);
        let bound = x * (2.0 - x);
        if !v.is_finite() || v < -BOUND_SLACK || v > bound + BOUND_SLACK {
            violations.push(q);
        }
    }
    let h = DIFF_STEP;
    let p_at_one = p.p_top(0.0);
    let dp_at_one = (3.0 * p_at_one - 4.0 * p.p_top(h) + p.p_top(2.0 * h)) / (2.0 * h);
    let passed = violations.is_empty() && p_at_one.abs() < 1e-10 && (dp_at_one + 2.0).abs() < 1e-6;
    PValidation { passed, violations, p_at_one, dp_at_one, checked: n_check }
}

pub fn describe_validation(v: &PValidation) -> String {
    let mut parts = Vec::new();
    if !v.violations.is_empty() {
        parts.push(format!(
            "0 <= P <= 1 - q^2 fails at {} of {} points (first at q = {:.6})",
            v.violations.len(),
            v.checked,
            v.violations[0]
        ));
    }
    if v.p_at_one.abs() >= 1e-10 {
        parts.push(format!("P(1) = {:e}, expected 0", v.p_at_one));
    }
    if (v.dp_at_one + 2.0).abs() >= 1e-6 {
        parts.push(format!("P'(1) = {:.9}, expected -2", v.dp_at_one));
    }
    parts.join("; ")
}

/// How the monotone descent from `q = 1` ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchEnd {
    /// Simple zero: `q` turns around after `W(q*)`.
    Turning { q_star: f64, w_star: f64 },
    /// Double zero: `q → q*` as `τ → ∞`.
    Asymptote { q_star: f64 },
    /// `P > 0` down to `q_min`; nothing is known beyond.
    Edge { q_min: f64, w_edge: f64 },
}

#[derive(Debug, Clone, Copy)]
enum ZeroKind {
    Simple,
    Double,
}

/// First zero of `P` below `q = 1`, as `(x*, kind)`.
fn first_zero(p: &PSpec) -> Result<Option<(f64, ZeroKind)>, WgenError> {
    let span = 1.0 - p.q_min;
    let xs: Vec<f64> = (0..=ZERO_SCAN).map(|i| span * i as f64 / ZERO_SCAN as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| p.p_top(x)).collect();
    let classify = |x: f64| {
        if p.p1(1.0 - x).abs() < DOUBLE_ZERO_TOL {
            ZeroKind::Double
        } else {
            ZeroKind::Simple
        }
    };
    for i in 1..=ZERO_SCAN {
        if !(vals[i] > 0.0) {
            if i == 1 {
                return Err(WgenError::InvalidProfile("P is not positive just below q = 1".into()));
            }
            let mut f = |x: f64| -> Result<f64, WgenError> { Ok(if p.p_top(x) > 0.0 { 1.0 } else { -1.0 }) };
            let x = bisect(&mut f, xs[i - 1], xs[i], 1e-16 * span)?
                .map_err(|e| WgenError::Root(e.to_string()))?;
            return Ok(Some((x, classify(x))));
        }
        // touching zero between samples
        if i < ZERO_SCAN && vals[i] < vals[i - 1] && vals[i] <= vals[i + 1] && vals[i] < 1e-6 {
            let mut d = |x: f64| -> Result<f64, WgenError> { Ok(-p.p1(1.0 - x)) };
            let (l, r) = (xs[i - 1], xs[i + 1]);
            if d(l)? < 0.0 && d(r)? > 0.0 {
                let xm = bisect(&mut d, l, r, 1e-16 * span)?.map_err(|e| WgenError::Root(e.to_string()))?;
                if p.p_top(xm) <= 1e-14 {
                    return Ok(Some((xm, ZeroKind::Double)));
                }
            }
        }
    }
    if vals[ZERO_SCAN].abs() <= 1e-13 {
        return Ok(Some((span, classify(span))));
    }
    Ok(None)
}

/// `∫ dx/√P(1 − x)` over `[xa, xb]`, `0 ≤ xa < xb`, by substitution at both
/// ends (`x = xa + u²` on the lower half, `x = xb − v²` on the upper).
/// `hi_zero` marks `xb` as a zero of `P`; `xa = 0` always is one.
fn segment_gl(p: &PSpec, xa: f64, xb: f64, hi_zero: bool) -> Result<f64, WgenError> {
    if xb <= xa {
        return Ok(0.0);
    }
    let m = 0.5 * (xa + xb);
    let mut lower = |u: f64| sub_integrand(p, xa, u, 1.0, xa == 0.0);
    let mut upper = |v: f64| sub_integrand(p, xb, v, -1.0, hi_zero);
    Ok(gauss_legendre(&mut lower, 0.0, (m - xa).sqrt())? + gauss_legendre(&mut upper, 0.0, (xb - m).sqrt())?)
}

/// Same integral with adaptive Gauss–Kronrod to absolute `tol`.
fn segment_adaptive(p: &PSpec, xa: f64, xb: f64, hi_zero: bool, tol: f64) -> Result<f64, WgenError> {
    if xb <= xa {
        return Ok(0.0);
    }
    let m = 0.5 * (xa + xb);
    let mut lower = |u: f64| sub_integrand(p, xa, u, 1.0, xa == 0.0);
    let mut upper = |v: f64| sub_integrand(p, xb, v, -1.0, hi_zero);
    Ok(adaptive_gk(&mut lower, 0.0, (m - xa).sqrt(), 0.5 * tol)?
        + adaptive_gk(&mut upper, 0.0, (xb - m).sqrt(), 0.5 * tol)?)
}

/// `2s/√P` at `x = end + dir·s²`. At a zero of `P` this is evaluated as
/// `2/√(P(x)/|x − end|)` with the rounded `x`, which keeps the ratio accurate
/// even when `s²` is far below the spacing of floats near `end`.
fn sub_integrand(p: &PSpec, end: f64, s: f64, dir: f64, zero: bool) -> Result<f64, WgenError> {
    let x = end + dir * s * s;
    let v = p.p_top(x);
    let d = dir * (x - end);
    if zero {
        if v > 0.0 && d > 1e-12 * end.abs().max(1.0) {
            return Ok(2.0 / (v / d).sqrt());
        }
        // P ≈ P_x(end)·(x − end)
        let slope = -p.p1(1.0 - end) * dir;
        if slope > 0.0 {
            return Ok(2.0 / slope.sqrt());
        }
    } else if v > 0.0 {
        return Ok(2.0 * s / v.sqrt());
    }
    Err(WgenError::NonPositive(1.0 - x))
}

/// `W(q) = ∫_q^1 dq'/√P(q')` to absolute accuracy `tol`.
pub fn w_integral(p: &PSpec, q: f64, tol: f64) -> Result<f64, WgenError> {
    let x = 1.0 - q;
    if !(q >= p.q_min && q <= 1.0) {
        return Err(WgenError::OutsideProfile { q, q_lo: p.q_min });
    }
    if let Some((xs, kind)) = first_zero(p)? {
        match kind {
            ZeroKind::Double if x >= xs => return Err(WgenError::NonIntegrable { q_zero: 1.0 - xs }),
            ZeroKind::Simple if x > xs * (1.0 + 1e-14) => {
                return Err(WgenError::OutsideProfile { q, q_lo: 1.0 - xs })
            }
            _ => {}
        }
        return segment_adaptive(p, 0.0, x.min(xs), x >= xs, tol);
    }
    segment_adaptive(p, 0.0, x, false, tol)
}

/// Tabulated inverse of `W` on the first monotone run, plus the number of
/// reflections applied at a turning point.
#[derive(Debug, Clone)]
pub struct WTable {
    p: PSpec,
    xs: Vec<f64>,
    ws: Vec<f64>,
    end: BranchEnd,
    laps: u32,
}

impl WTable {
    pub fn build(p: &PSpec) -> Result<Self, WgenError> {
        let v = validate_p(p, 256);
        if !v.passed {
            return Err(WgenError::InvalidProfile(describe_validation(&v)));
        }
        let zero = first_zero(p)?;
        let (x_end, kind) = match zero {
            Some((x, k)) => (x, Some(k)),
            None => (1.0 - p.q_min, None),
        };
        let mut xs: Vec<f64>;
        match kind {
            Some(ZeroKind::Double) => {
                let d0 = 0.1 * x_end;
                let top = x_end - d0;
                xs = cosine_nodes(top, TABLE_NODES);
                let floor = 1e-15 * (1.0 - x_end).abs().max(1.0);
                let mut d = d0;
                // stop where P is no longer resolved above rounding
                while d > floor && p.p_top(x_end - 0.5 * d) > 1e-13 {
                    d *= 0.5;
                    xs.push(x_end - d);
                }
            }
            _ => xs = cosine_nodes(x_end, TABLE_NODES),
        }
        let mut ws = vec![0.0];
        let mut refined = vec![xs[0]];
        for pair in xs.windows(2) {
            let mut stack = vec![(pair[0], pair[1])];
            // depth-first, left to right
            while let Some((a, b)) = stack.pop() {
                let dw = segment_gl(p, a, b, b == x_end && kind.is_some())?;
                if dw > MAX_W_STEP && b - a > 1e-15 {
                    let m = 0.5 * (a + b);
                    stack.push((m, b));
                    stack.push((a, m));
                    continue;
                }
                let w = ws.last().unwrap() + dw;
                refined.push(b);
                ws.push(w);
            }
            if matches!(kind, Some(ZeroKind::Double)) && *ws.last().unwrap() > ASYMPTOTE_W {
                break;
            }
        }
        let w_last = *ws.last().unwrap();
        let end = match kind {
            Some(ZeroKind::Simple) => BranchEnd::Turning { q_star: 1.0 - x_end, w_star: w_last },
            Some(ZeroKind::Double) => BranchEnd::Asymptote { q_star: 1.0 - x_end },
            None => BranchEnd::Edge { q_min: p.q_min, w_edge: w_last },
        };
        Ok(WTable { p: p.clone(), xs: refined, ws, end, laps: 0 })
    }

    pub fn profile(&self) -> &PSpec {
        &self.p
    }

    pub fn end(&self) -> BranchEnd {
        self.end
    }

    /// Sign of `dq/dτ` on the last run.
    pub fn branch_state(&self) -> f64 {
        if self.laps % 2 == 0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn laps(&self) -> u32 {
        self.laps
    }

    /// Largest τ the table answers for.
    pub fn w_max(&self) -> f64 {
        match self.end {
            BranchEnd::Turning { w_star, .. } => (self.laps + 1) as f64 * w_star,
            BranchEnd::Asymptote { .. } => f64::INFINITY,
            BranchEnd::Edge { w_edge, .. } => w_edge,
        }
    }

    /// `(q, W)` pairs of the first run, `q` decreasing.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().zip(&self.ws).map(|(&x, &w)| (1.0 - x, w))
    }

    /// `x = 1 − q` on the first run at `W = w`.
    fn invert_first_run(&self, w: f64) -> Result<f64, WgenError> {
        if w < SERIES_TAU {
            return Ok(0.5 * w * w);
        }
        let last = *self.ws.last().unwrap();
        if w >= last {
            return match self.end {
                BranchEnd::Asymptote { q_star } => Ok(1.0 - q_star),
                _ if w - last <= 1e-12 * last.max(1.0) => Ok(*self.xs.last().unwrap()),
                _ => Err(WgenError::OutOfRange { tau: w, w_max: last }),
            };
        }
        let j = self.ws.partition_point(|&v| v <= w) - 1;
        let (xa, xb, wa) = (self.xs[j], self.xs[j + 1], self.ws[j]);
        let mut f = |x: f64| -> Result<f64, WgenError> { Ok(wa + segment_gl(&self.p, xa, x, false)? - w) };
        brent(&mut f, xa, xb, INVERT_TOL)?.map_err(|e| WgenError::Root(e.to_string()))
    }

    /// `(x, branch)` at τ ≥ 0, with `q = 1 − x` and `branch = sign(dq/dτ)`.
    fn locate(&self, tau: f64, periodic: bool) -> Result<(f64, f64), WgenError> {
        if !(tau >= 0.0) {
            return Err(WgenError::OutOfRange { tau, w_max: self.w_max() });
        }
        match self.end {
            BranchEnd::Turning { w_star, .. } => {
                if !periodic && tau > self.w_max() * (1.0 + 1e-14) {
                    return Err(WgenError::OutOfRange { tau, w_max: self.w_max() });
                }
                let lap = ((tau / w_star).floor() as u32).min(if periodic { u32::MAX } else { self.laps });
                let local = tau - lap as f64 * w_star;
                if lap % 2 == 0 {
                    Ok((self.invert_first_run(local.min(w_star))?, -1.0))
                } else {
                    Ok((self.invert_first_run((w_star - local).max(0.0))?, 1.0))
                }
            }
            _ => Ok((self.invert_first_run(tau)?, -1.0)),
        }
    }
}

fn cosine_nodes(x_end: f64, n: usize) -> Vec<f64> {
    // clustered toward x = 0 only: near a simple zero at the far end the
    // integrand is resolved by substitution, and short segments there would
    // expose the rounding of x to the substitution
    let mut xs: Vec<f64> = (0..n).map(|j| x_end * (1.0 - (0.5 * PI * j as f64 / (n - 1) as f64).cos())).collect();
    xs[n - 1] = x_end;
    xs
}

/// `q(τ)` from the table; `τ` beyond the covered branch is an error.
pub fn invert_w(table: &WTable, tau: f64) -> Result<f64, WgenError> {
    Ok(1.0 - table.locate(tau, false)?.0)
}

/// Reflects `q` at the simple zero `q_star`, extending the table by one run.
pub fn continue_through_turning_point(table: &WTable, q_star: f64) -> Result<WTable, WgenError> {
    let p = &table.p;
    match table.end {
        BranchEnd::Turning { q_star: qs, .. } if (qs - q_star).abs() <= 1e-9 => {
            Ok(WTable { laps: table.laps + 1, ..table.clone() })
        }
        BranchEnd::Asymptote { q_star: qs } if (qs - q_star).abs() <= 1e-9 => Err(WgenError::StuckAtZero { q_star }),
        _ => {
            let v = p.p(q_star);
            if v.abs() < 1e-12 && p.p1(q_star).abs() < DOUBLE_ZERO_TOL {
                Err(WgenError::StuckAtZero { q_star })
            } else {
                Err(WgenError::NotTurningPoint { q: q_star, p: v })
            }
        }
    }
}

/// `(q', q'')` on the given branch: `q' = branch·√P`, `q'' = P'/2`.
pub fn q_derivatives_from_p(p: &PSpec, q: f64, branch: f64) -> (f64, f64) {
    let x = 1.0 - q;
    (branch * p.p_top(x).max(0.0).sqrt(), 0.5 * p.p1(q))
}

#[derive(Debug)]
struct WGenQ {
    table: WTable,
}

impl QEvaluator for WGenQ {
    fn eval(&self, tau: f64) -> Result<QSample, FamilyError> {
        let (x, branch) = self.table.locate(tau.abs(), true).map_err(|e| match e {
            WgenError::OutOfRange { tau: t, w_max } => FamilyError::OutOfRange {
                family: format!("wgen:{}", self.table.p.name),
                tau: t,
                lo: -w_max,
                hi: w_max,
            },
            other => FamilyError::Evaluation(other.to_string()),
        })?;
        let p = &self.table.p;
        let sign = if tau < 0.0 { -branch } else { branch };
        let q = 1.0 - x;
        Ok(QSample { tau, q, q1: sign * p.p_top(x).max(0.0).sqrt(), q2: 0.5 * p.p1(q), n: p.curvature_top(x) })
    }
}

/// The even generator `q(τ) = W⁻¹(|τ|)`, continued periodically through
/// simple zeros of `P`.
pub fn family_wgen(p: &PSpec) -> Result<QFamily, WgenError> {
    let table = WTable::build(p)?;
    let name = format!("wgen:{}", p.name);
    Ok(QFamily::custom(name, p.params.clone(), Arc::new(WGenQ { table }), Parity::Even))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{family_arctan_trig, family_tanh, validate_initial_conditions};
    use proptest::prelude::*;

    fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    /// `(1 − q²)·r(q)` with `r = 1 − Σ c_k ((1 − q)/2)^k`, `Σ c_k < 1`.
    fn damped_circle(cs: &[f64]) -> PSpec {
        let mut r = vec![1.0];
        let mut pow = vec![1.0];
        for &c in cs {
            pow = mul(&pow, &[0.5, -0.5]);
            let mut term: Vec<f64> = pow.iter().map(|v| -c * v).collect();
            term.resize(term.len().max(r.len()), 0.0);
            r.resize(term.len(), 0.0);
            for (a, b) in r.iter_mut().zip(&term) {
                *a += b;
            }
        }
        PSpec::polynomial(mul(&[1.0, 0.0, -1.0], &r), -1.0).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(validate_p(&PSpec::circle(), 64).passed);
        let lin = PSpec::polynomial(vec![2.0, -2.0], -1.0).unwrap();
        let v = validate_p(&lin, 64);
        assert!(!v.passed && !v.violations.is_empty());
        let sq = PSpec::polynomial(vec![1.0, 0.0, -2.0, 0.0, 1.0], -1.0).unwrap();
        let v = validate_p(&sq, 64);
        assert!(!v.passed && v.violations.is_empty() && v.dp_at_one.abs() < 1e-6);
        for a in [0.6, 1.0, 2.0, 2.0 * 2f64.sqrt()] {
            assert!(validate_p(&PSpec::tanh_sq(a).unwrap(), 256).passed, "{a}");
        }
        for a in [0.1, 0.5, 1.0] {
            assert!(validate_p(&PSpec::arctan_trig(a).unwrap(), 256).passed, "{a}");
        }
    }

    #[test]
    fn polynomial_shift_matches_direct() {
        let p = PSpec::polynomial(vec![0.3, -1.2, 0.7, 0.25], -1.0).unwrap();
        for q in [-0.9, -0.2, 0.4, 0.99] {
            assert!((p.p(q) - p.p_top(1.0 - q)).abs() < 1e-14);
            assert!((p.curvature_top(1.0 - q) - (q + 0.5 * p.p1(q))).abs() < 1e-14);
        }
    }

    #[test]
    fn w_integral_examples() {
        let c = PSpec::circle();
        assert!((w_integral(&c, 0.0, 1e-13).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((w_integral(&c, 0.5, 1e-13).unwrap() - PI / 3.0).abs() < 1e-12);
        assert!((w_integral(&c, -1.0, 1e-13).unwrap() - PI).abs() < 1e-12);
        let t = PSpec::tanh_sq(1.0).unwrap();
        let exact = 0.2f64.sqrt().atanh();
        assert!((w_integral(&t, 0.9, 1e-13).unwrap() - exact).abs() < 1e-12);
        assert!(matches!(w_integral(&t, 0.5, 1e-13), Err(WgenError::NonIntegrable { .. })));
        assert!(matches!(w_integral(&t, 0.2, 1e-13), Err(WgenError::OutsideProfile { .. })));
    }

    #[test]
    fn inversion_examples() {
        let c = WTable::build(&PSpec::circle()).unwrap();
        assert!(matches!(c.end(), BranchEnd::Turning { q_star, w_star } if (q_star + 1.0).abs() < 1e-12 && (w_star - PI).abs() < 1e-10));
        assert!((invert_w(&c, PI / 3.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(invert_w(&c, 0.0).unwrap(), 1.0);
        assert!(matches!(invert_w(&c, 4.0), Err(WgenError::OutOfRange { .. })));
        let t = WTable::build(&PSpec::tanh_sq(1.0).unwrap()).unwrap();
        let q = invert_w(&t, 0.3).unwrap();
        assert!((q - (1.0 - 0.3f64.tanh().powi(2) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn derivative_examples() {
        let (q1, q2) = q_derivatives_from_p(&PSpec::circle(), 0.5, -1.0);
        assert!((q1 + 0.75f64.sqrt()).abs() < 1e-15 && (q2 + 0.5).abs() < 1e-15);
        let (q1, q2) = q_derivatives_from_p(&PSpec::circle(), 1.0, -1.0);
        assert!(q1 == 0.0 && q2 == -1.0);
        let p = PSpec::tanh_sq(1.0).unwrap();
        let t = WTable::build(&p).unwrap();
        let q = invert_w(&t, 0.3).unwrap();
        let (q1, _) = q_derivatives_from_p(&p, q, -1.0);
        let h = 1e-5;
        let fd = (invert_w(&t, 0.3 + h).unwrap() - invert_w(&t, 0.3 - h).unwrap()) / (2.0 * h);
        assert!((q1 - fd).abs() < 1e-7, "{q1} {fd}");
    }

    #[test]
    fn continuation_examples() {
        let c = WTable::build(&PSpec::circle()).unwrap();
        let c2 = continue_through_turning_point(&c, -1.0).unwrap();
        assert_eq!(c2.branch_state(), 1.0);
        for t in [3.5, 4.0, 5.5, 2.0 * PI] {
            let q = invert_w(&c2, t).unwrap();
            assert!((q - t.cos()).abs() < 1e-11, "{t} {q} {:e}", q - t.cos());
        }
        let c3 = continue_through_turning_point(&c2, -1.0).unwrap();
        assert!((invert_w(&c3, 7.0).unwrap() - 7f64.cos()).abs() < 1e-11);

        let stuck = PSpec::polynomial(vec![0.0, 0.0, 1.0, 0.0, -1.0], -1.0).unwrap();
        let t = WTable::build(&stuck).unwrap();
        assert!(matches!(t.end(), BranchEnd::Asymptote { q_star } if q_star.abs() < 1e-6));
        assert!(matches!(continue_through_turning_point(&t, 0.0), Err(WgenError::StuckAtZero { .. })));
        let tn = WTable::build(&PSpec::tanh_sq(1.0).unwrap()).unwrap();
        assert!(matches!(continue_through_turning_point(&tn, 0.5), Err(WgenError::StuckAtZero { .. })));
        assert!(matches!(continue_through_turning_point(&c, 0.3), Err(WgenError::NotTurningPoint { .. })));
    }

    #[test]
    fn arctan_profile_reproduces_family() {
        for a in [0.1, 0.5] {
            let p = PSpec::arctan_trig(a).unwrap();
            let t = WTable::build(&p).unwrap();
            let BranchEnd::Turning { w_star, .. } = t.end() else { panic!("{:?}", t.end()) };
            assert!((w_star - PI).abs() < 1e-9, "{w_star}");
            let g = family_wgen(&p).unwrap();
            let f = family_arctan_trig(a).unwrap();
            for tau in [-7.0, -0.4, 0.0, 1.3, 3.0, 4.2, 9.9] {
                let (x, y) = (g.sample(tau).unwrap(), f.sample(tau).unwrap());
                assert!((x.q - y.q).abs() < 1e-10 && (x.q1 - y.q1).abs() < 1e-8, "{a} {tau} {x:?} {y:?}");
                assert!((x.q2 - y.q2).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tanh_profile_reproduces_family() {
        let g = family_wgen(&PSpec::tanh_sq(2.0).unwrap()).unwrap();
        let f = family_tanh(2.0).unwrap();
        for tau in [-3.0, 0.01, 0.5, 2.0, 8.0] {
            let (x, y) = (g.sample(tau).unwrap(), f.sample(tau).unwrap());
            assert!((x.q - y.q).abs() < 1e-10 && (x.q1 - y.q1).abs() < 1e-8, "{tau} {x:?} {y:?}");
            assert!((x.n - y.n).abs() < 1e-8);
        }
        let r = validate_initial_conditions(&g).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn boundary_behaviour() {
        for p in [PSpec::circle(), PSpec::tanh_sq(1.5).unwrap(), damped_circle(&[0.3, 0.2])] {
            for k in 4..=8 {
                let q = 1.0 - 10f64.powi(-k);
                let w = w_integral(&p, q, 1e-15).unwrap();
                assert!((w / (2.0 - 2.0 * q).sqrt() - 1.0).abs() < 1e-3, "{} {k}", p.name());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn w_dominates_arccos(c1 in 0.0..0.45f64, c2 in 0.0..0.45f64) {
            let p = damped_circle(&[c1, c2]);
            let t = WTable::build(&p).unwrap();
            for (q, w) in t.nodes().step_by(37) {
                prop_assert!(w >= q.clamp(-1.0, 1.0).acos() - 1e-12, "{q} {w}");
            }
        }

        #[test]
        fn round_trip(c1 in 0.0..0.45f64, q in -0.95..0.999f64) {
            let p = damped_circle(&[c1]);
            let t = WTable::build(&p).unwrap();
            let w = w_integral(&p, q, 1e-13).unwrap();
            prop_assert!((invert_w(&t, w).unwrap() - q).abs() < 1e-10);
        }
    }
}

//! Generator functions `q(τ)` and their first two derivatives.
//!
//! A generator must satisfy `q(0) = 1`, `q'(0) = 0`, `q''(0) = −1` and stay
//! inside the closed unit disk in the phase plane, `q² + q'² ≤ 1`. Any such
//! function yields an exactly solvable control; see [`crate::synth`].

mod builtin;
mod closed_form;
mod sampled;
pub(crate) mod validity;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{
    family_arctan_trig, family_cos, family_gauss_cos, family_sinh_exp, family_tanh,
};
pub use sampled::SampledQ;
pub use validity::{
    validate_initial_conditions, validity_domain, validity_domain_on, InitialConditionReport,
    ValidityReport, INITIAL_CONDITION_TOL, SCAN_DENSITY,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("invalid parameter for `{family}`: {message}")]
    InvalidParameter { family: String, message: String },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("missing parameter `{param}` for family `{family}`")]
    MissingParameter { family: String, param: String },
    #[error("family `{0}` has no closed-form control")]
    NoClosedForm(String),
    #[error("closed form is singular at tau = {tau} (within the window around {center}); use the limit")]
    SingularPoint { tau: f64, center: f64 },
    #[error("tau = {tau} is outside the range [{lo}, {hi}] where `{family}` is defined")]
    OutOfRange { family: String, tau: f64, lo: f64, hi: f64 },
    #[error(
        "empty validity domain: 1 - q^2 - q'^2 < 0 for every sampled tau != 0 in [{lo}, {hi}]"
    )]
    DomainEmpty { lo: f64, hi: f64 },
    #[error("generator evaluation failed: {0}")]
    Evaluation(String),
}

/// `(τ, q, dq/dτ, d²q/dτ²)` plus `q'' + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSample {
    pub tau: f64,
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
    /// `q'' + q`. Evaluators that can avoid the cancellation near `|q| = 1`
    /// supply it directly; [`QSample::new`] falls back to the plain sum.
    pub n: f64,
}

impl QSample {
    pub fn new(tau: f64, q: f64, q1: f64, q2: f64) -> Self {
        QSample { tau, q, q1, q2, n: q2 + q }
    }

    /// `|z|` for the phase-plane point `z = q + i q'`.
    pub fn z_norm(&self) -> f64 {
        self.q.hypot(self.q1)
    }

    /// `1 − q² − q'²`, evaluated directly. Loses relative accuracy near
    /// saturation; see `synth` for the compensated form.
    pub fn gap(&self) -> f64 {
        (1.0 - self.q) * (1.0 + self.q) - self.q1 * self.q1
    }

    /// `q'' + q`, the numerator of the control.
    pub fn curvature(&self) -> f64 {
        self.n
    }
}

/// A user-supplied generator.
pub trait QEvaluator: Send + Sync + fmt::Debug {
    fn eval(&self, tau: f64) -> Result<QSample, FamilyError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    None,
}

#[derive(Debug, Clone)]
pub(crate) enum FamilyKind {
    SinhExp { a: f64 },
    GaussCos { b: f64 },
    Tanh { a: f64 },
    ArctanTrig { a: f64 },
    Cos,
    Custom(Arc<dyn QEvaluator>),
}

#[derive(Debug, Clone)]
pub struct QFamily {
    name: String,
    params: BTreeMap<String, f64>,
    kind: FamilyKind,
    parity: Parity,
    identically_saturated: bool,
    asymptote: Option<f64>,
}

impl QFamily {
    pub(crate) fn builtin(
        name: &str,
        params: &[(&str, f64)],
        kind: FamilyKind,
        identically_saturated: bool,
        asymptote: Option<f64>,
    ) -> Self {
        QFamily {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            kind,
            parity: Parity::Even,
            identically_saturated,
            asymptote,
        }
    }

    /// Wraps an arbitrary evaluator. The parity flag is trusted but checked by
    /// [`QFamily::check_parity`].
    pub fn custom(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        evaluator: Arc<dyn QEvaluator>,
        parity: Parity,
    ) -> Self {
        QFamily {
            name: name.into(),
            params,
            kind: FamilyKind::Custom(evaluator),
            parity,
            identically_saturated: false,
            asymptote: None,
        }
    }

    /// Cubic-spline adapter for a generator known only through samples.
    /// Derivatives are as good as the spline, no better.
    pub fn from_samples(taus: Vec<f64>, qs: Vec<f64>) -> Result<Self, FamilyError> {
        let spline = SampledQ::new(taus, qs)?;
        Ok(QFamily::custom("samples", BTreeMap::new(), Arc::new(spline), Parity::None))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_even(&self) -> bool {
        self.parity == Parity::Even
    }

    /// `q² + q'² ≡ 1`: the control vanishes identically.
    pub fn identically_saturated(&self) -> bool {
        self.identically_saturated
    }

    /// Large-τ limit of `J/h`, when the family has one worth reporting.
    pub fn asymptote(&self) -> Option<f64> {
        self.asymptote
    }

    pub fn sample(&self, tau: f64) -> Result<QSample, FamilyError> {
        match &self.kind {
            FamilyKind::SinhExp { a } => Ok(builtin::sinh_exp(*a, tau)),
            FamilyKind::GaussCos { b } => Ok(builtin::gauss_cos(*b, tau)),
            FamilyKind::Tanh { a } => Ok(builtin::tanh(*a, tau)),
            FamilyKind::ArctanTrig { a } => Ok(builtin::arctan_trig(*a, tau)),
            FamilyKind::Cos => Ok(builtin::cosine(tau)),
            FamilyKind::Custom(e) => e.eval(tau),
        }
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::SinhExp { .. } | FamilyKind::GaussCos { .. } | FamilyKind::Tanh { .. }
        )
    }

    /// The reference closed-form control `J/h` at `τ`. This is a cross-check
    /// oracle only and is never used by the synthesis pipeline.
    pub fn closed_form_jh(&self, tau: f64, eps_singular: f64) -> Result<f64, FamilyError> {
        let center = match &self.kind {
            FamilyKind::SinhExp { a } => closed_form::nearest_singular_sinh_exp(*a, tau),
            FamilyKind::GaussCos { .. } | FamilyKind::Tanh { .. } => 0.0,
            _ => return Err(FamilyError::NoClosedForm(self.name.clone())),
        };
        if (tau - center).abs() < eps_singular {
            return Err(FamilyError::SingularPoint { tau, center });
        }
        Ok(match &self.kind {
            FamilyKind::SinhExp { a } => closed_form::sinh_exp_jh(*a, tau),
            FamilyKind::GaussCos { b } => closed_form::gauss_cos_jh(*b, tau),
            FamilyKind::Tanh { a } => closed_form::tanh_jh(*a, tau),
            _ => unreachable!(),
        })
    }

    /// Samples `q(−τ) = q(τ)` and `q'(−τ) = −q'(τ)` on `taus`; returns the
    /// worst deviation.
    pub fn check_parity(&self, taus: &[f64]) -> Result<f64, FamilyError> {
        let mut worst = 0.0f64;
        for &t in taus {
            let p = self.sample(t)?;
            let m = self.sample(-t)?;
            worst = worst.max((p.q - m.q).abs()).max((p.q1 + m.q1).abs());
        }
        Ok(worst)
    }
}

/// Serialized family selection, e.g. `{"family": "gauss_cos", "b": 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

/// Names and parameter lists of the built-in families.
pub const BUILTIN_FAMILIES: &[(&str, &[&str], &str)] = &[
    ("sinh_exp", &["a"], "q = exp(-(2/a) sinh^2(sqrt(a) tau / 2)), a <= 2"),
    ("gauss_cos", &["b"], "q = (exp(-tau^2/2) + b cos tau) / (1 + b), b > -1"),
    ("tanh", &["a"], "q = 1 - tanh^2(a tau) / (2 a^2), a > 0"),
    ("arctan_trig", &["a"], "q = (1/a) tan(atan a - (2a/(1+a^2)) sin^2(tau/2)), a > 0"),
    ("cos", &[], "q = cos tau (saturated, J = 0)"),
];

impl FamilySpec {
    pub fn new(family: &str, params: &[(&str, f64)]) -> Self {
        FamilySpec {
            family: family.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn param(&self, key: &str) -> Result<f64, FamilyError> {
        self.params.get(key).copied().ok_or_else(|| FamilyError::MissingParameter {
            family: self.family.clone(),
            param: key.to_string(),
        })
    }

    pub fn build(&self) -> Result<QFamily, FamilyError> {
        match self.family.as_str() {
            "sinh_exp" => family_sinh_exp(self.param("a")?),
            "gauss_cos" => family_gauss_cos(self.param("b")?),
            "tanh" => family_tanh(self.param("a")?),
            "arctan_trig" => family_arctan_trig(self.param("a")?),
            "cos" => Ok(family_cos()),
            other => Err(FamilyError::UnknownFamily(other.to_string())),
        }
    }
}

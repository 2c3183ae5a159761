use super::{FamilyError, FamilyKind, QFamily, QSample};

fn invalid(family: &str, message: String) -> FamilyError {
    FamilyError::InvalidParameter { family: family.to_string(), message }
}

/// `q = exp{−(2/a) sinh²(√a τ/2)}` for `a ≤ 2`. Even; a single pulse for
/// `a ≥ 0`, periodic for `a < 0`.
pub fn family_sinh_exp(a: f64) -> Result<QFamily, FamilyError> {
    if !a.is_finite() || a > 2.0 {
        return Err(invalid("sinh_exp", format!("requires a <= 2 (got {a})")));
    }
    Ok(QFamily::builtin("sinh_exp", &[("a", a)], FamilyKind::SinhExp { a }, false, None))
}

/// `q = [e^{−τ²/2} + b cos τ]/(1 + b)` for `b > −1`.
pub fn family_gauss_cos(b: f64) -> Result<QFamily, FamilyError> {
    if !b.is_finite() || b <= -1.0 {
        return Err(invalid("gauss_cos", format!("requires b > -1 (got {b})")));
    }
    Ok(QFamily::builtin("gauss_cos", &[("b", b)], FamilyKind::GaussCos { b }, false, None))
}

/// `q = 1 − tanh²(aτ)/(2a²)` for `a > 0`. For `a > 1/√2` the control tends to
/// `(2a² − 1)/√(4a² − 1)`, attached as the family asymptote.
pub fn family_tanh(a: f64) -> Result<QFamily, FamilyError> {
    if !a.is_finite() || a <= 0.0 {
        return Err(invalid("tanh", format!("requires a > 0 (got {a})")));
    }
    let asymptote = (a > std::f64::consts::FRAC_1_SQRT_2)
        .then(|| (2.0 * a * a - 1.0) / (4.0 * a * a - 1.0).sqrt());
    Ok(QFamily::builtin("tanh", &[("a", a)], FamilyKind::Tanh { a }, false, asymptote))
}

/// `q = (1/a) tan{arctan a − (2a/(1 + a²)) sin²(τ/2)}` for `a > 0`; period 2π.
pub fn family_arctan_trig(a: f64) -> Result<QFamily, FamilyError> {
    if !a.is_finite() || a <= 0.0 {
        return Err(invalid("arctan_trig", format!("requires a > 0 (got {a})")));
    }
    Ok(QFamily::builtin("arctan_trig", &[("a", a)], FamilyKind::ArctanTrig { a }, false, None))
}

/// `q = cos τ`: free precession, `J ≡ 0`.
pub fn family_cos() -> QFamily {
    QFamily::builtin("cos", &[], FamilyKind::Cos, true, None)
}

/// Exponent `E(τ) = (2/a) sinh²(√a τ/2)` with `E'`, `E''` and `1 − E''`,
/// continued to `a = 0` (`τ²/2`) and `a < 0` (`(2/|a|) sin²(√|a| τ/2)`).
pub(crate) fn sinh_exp_exponent(a: f64, tau: f64) -> (f64, f64, f64, f64) {
    if a > 0.0 {
        let c = a.sqrt();
        let s = (0.5 * c * tau).sinh();
        (2.0 * s * s / a, (c * tau).sinh() / c, (c * tau).cosh(), -2.0 * s * s)
    } else if a < 0.0 {
        let c = (-a).sqrt();
        let s = (0.5 * c * tau).sin();
        (-2.0 * s * s / a, (c * tau).sin() / c, (c * tau).cos(), 2.0 * s * s)
    } else {
        (0.5 * tau * tau, tau, 1.0, 0.0)
    }
}

// Each evaluator also returns `q'' + q` in a form free of the cancellation
// near `q = ±1`, where both terms are close to ±1.

pub(crate) fn sinh_exp(a: f64, tau: f64) -> QSample {
    let (e, e1, e2, one_minus_e2) = sinh_exp_exponent(a, tau);
    let q = (-e).exp();
    if q == 0.0 {
        return QSample { tau, q: 0.0, q1: 0.0, q2: 0.0, n: 0.0 };
    }
    QSample { tau, q, q1: -e1 * q, q2: (e1 * e1 - e2) * q, n: (e1 * e1 + one_minus_e2) * q }
}

pub(crate) fn gauss_cos(b: f64, tau: f64) -> QSample {
    let g = (-0.5 * tau * tau).exp();
    let (s, c) = tau.sin_cos();
    let n = 1.0 + b;
    QSample {
        tau,
        q: (g + b * c) / n,
        q1: (-tau * g - b * s) / n,
        q2: ((tau * tau - 1.0) * g - b * c) / n,
        n: tau * tau * g / n,
    }
}

pub(crate) fn tanh(a: f64, tau: f64) -> QSample {
    let x = a * tau;
    let t = x.tanh();
    let sech = 1.0 / x.cosh();
    let s2 = sech * sech;
    QSample {
        tau,
        q: 1.0 - t * t / (2.0 * a * a),
        q1: -t * s2 / a,
        q2: s2 * (2.0 * t * t - s2),
        // 1 − sech⁴ = tanh²(1 + sech²)
        n: t * t * (1.0 + 3.0 * s2 - 1.0 / (2.0 * a * a)),
    }
}

pub(crate) fn arctan_trig(a: f64, tau: f64) -> QSample {
    let k = 2.0 * a / (1.0 + a * a);
    let sh = (0.5 * tau).sin();
    let sh2 = sh * sh;
    let theta = a.atan() - k * sh2;
    let d1 = -0.5 * k * tau.sin();
    let d2 = -0.5 * k * tau.cos();
    let tn = theta.tan();
    let sec2 = 1.0 + tn * tn;
    // tan θ − a = sin(θ − arctan a)/(cos θ cos(arctan a)), θ − arctan a = −k sin²(τ/2)
    let tn_minus_a = -(k * sh2).sin() * (1.0 + a * a).sqrt() / theta.cos();
    let n = tn_minus_a * (1.0 - a * tn) / (1.0 + a * a) + sec2 * k * sh2 + 2.0 * tn * sec2 * d1 * d1;
    QSample {
        tau,
        q: tn / a,
        q1: sec2 * d1 / a,
        q2: sec2 * (2.0 * tn * d1 * d1 + d2) / a,
        n: n / a,
    }
}

pub(crate) fn cosine(tau: f64) -> QSample {
    let (s, c) = tau.sin_cos();
    QSample { tau, q: c, q1: -s, q2: -c, n: 0.0 }
}

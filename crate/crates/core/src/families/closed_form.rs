//! Reference closed-form controls in `τ` units, used as independent oracles.
//!
//! These are kept independent of the generic pipeline on purpose: they are
//! the second route in the pipeline-vs-closed-form check. The only liberties
//! taken are exact identities that avoid cancellation near τ = 0: `expm1` for
//! `e^x − 1`, `tanh²(1 + sech²)` for `1 − sech⁴`, and for `sinh_exp` the
//! relation `(1/a)sinh²(√a τ) = u + (a/4)u²` with `u = (4/a)sinh²(√a τ/2)`.

use std::f64::consts::PI;

/// `(1/a) sinh²(√a x)`, continued to `a ≤ 0`.
fn sinh2_over_a(a: f64, x: f64) -> f64 {
    if a > 0.0 {
        let s = (a.sqrt() * x).sinh();
        s * s / a
    } else if a < 0.0 {
        let s = ((-a).sqrt() * x).sin();
        -(s * s) / a
    } else {
        x * x
    }
}

/// Singular points of the reference expression: τ = 0, plus `2πk/√|a|` when `a < 0`.
pub(super) fn nearest_singular_sinh_exp(a: f64, tau: f64) -> f64 {
    if a < 0.0 {
        let period = 2.0 * PI / (-a).sqrt();
        (tau / period).round() * period
    } else {
        0.0
    }
}

/// `e^u − 1 − u − u²/2` without cancellation for small `u`.
fn exp_tail3(u: f64) -> f64 {
    if u.abs() >= 0.5 {
        return u.exp_m1() - u - 0.5 * u * u;
    }
    let mut term = u * u * u / 6.0;
    let mut sum = 0.0f64;
    let mut k = 3.0;
    while term.abs() > 1e-18 * sum.abs() {
        sum += term;
        k += 1.0;
        term *= u / k;
    }
    sum
}

/// `J/h = [(1/a)sinh²(√a τ) − 2 sinh²(√a τ/2)] / √(e^{(4/a) sinh²(√a τ/2)} − (1/a)sinh²(√a τ) − 1)`
///
/// With `u = (4/a)sinh²(√a τ/2)` the numerator is `(1 − a/2)u + (a/4)u²` and
/// the radicand `(1/2 − a/4)u² + (e^u − 1 − u − u²/2)`.
pub(super) fn sinh_exp_jh(a: f64, tau: f64) -> f64 {
    let u = 4.0 * sinh2_over_a(a, 0.5 * tau);
    let num = (1.0 - 0.5 * a) * u + 0.25 * a * u * u;
    let den = (0.5 - 0.25 * a) * u * u + exp_tail3(u);
    num / den.sqrt()
}

/// `J/h = τ² e^{−τ²/2} / √(1 − (1 + τ²) e^{−τ²} + 2bχ)`,
/// `χ = 1 − e^{−τ²/2}[cos τ + τ sin τ]`.
pub(super) fn gauss_cos_jh(b: f64, tau: f64) -> f64 {
    let t2 = tau * tau;
    let half = (-0.5 * t2).exp();
    let s = (0.5 * tau).sin();
    // 1 - (1 + τ²)e^{-τ²}
    let first = -(-t2).exp_m1() - t2 * (-t2).exp();
    // χ with cos τ − 1 = −2 sin²(τ/2)
    let chi = -(-0.5 * t2).exp_m1() - half * (-2.0 * s * s + tau * tau.sin());
    t2 * half / (first + 2.0 * b * chi).sqrt()
}

/// `J/h = [14a² − 1 + (2a² − 1) cosh(2aτ)] sech²(aτ) / (2 coth(aτ) √(4a²[1 − sech⁴(aτ)] − tanh²(aτ)))`.
///
/// The reference form takes the positive root for `τ > 0`; the control is even,
/// so negative τ is evaluated at `|τ|`.
pub(super) fn tanh_jh(a: f64, tau: f64) -> f64 {
    let x = a * tau.abs();
    let a2 = a * a;
    let t = x.tanh();
    let sech = 1.0 / x.cosh();
    let sech2 = sech * sech;
    let num = if x < 300.0 {
        (14.0 * a2 - 1.0 + (2.0 * a2 - 1.0) * (2.0 * x).cosh()) * sech2
    } else {
        // cosh(2x) sech²(x) = 2 − sech²(x) without overflow
        (14.0 * a2 - 1.0) * sech2 + (2.0 * a2 - 1.0) * (2.0 - sech2)
    };
    let one_minus_sech4 = t * t * (1.0 + sech2);
    let root = (4.0 * a2 * one_minus_sech4 - t * t).sqrt();
    num / (2.0 / t * root)
}

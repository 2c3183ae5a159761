//! Bracketed scalar root finding.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}] (f = {flo:e}, {fhi:e})")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("non-finite function value at x = {0}")]
    NonFinite(f64),
}

/// Brent's method on a sign-changing bracket. Terminates when the bracket
/// width drops below `xtol` (absolute) or an exact zero is hit.
pub fn brent<E, F>(f: &mut F, lo: f64, hi: f64, xtol: f64) -> Result<Result<f64, RootError>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if !fa.is_finite() {
        return Ok(Err(RootError::NonFinite(a)));
    }
    if !fb.is_finite() {
        return Ok(Err(RootError::NonFinite(b)));
    }
    if fa == 0.0 {
        return Ok(Ok(a));
    }
    if fb == 0.0 {
        return Ok(Ok(b));
    }
    if fa.signum() == fb.signum() {
        return Ok(Err(RootError::NotBracketed { lo, hi, flo: fa, fhi: fb }));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Ok(b));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
        if !fb.is_finite() {
            return Ok(Err(RootError::NonFinite(b)));
        }
    }
    Ok(Ok(b))
}

/// Plain bisection on a sign change; used where the function is only
/// trustworthy in sign (e.g. near cancellation).
pub fn bisect<E, F>(f: &mut F, lo: f64, hi: f64, xtol: f64) -> Result<Result<f64, RootError>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(Ok(a));
    }
    if fb == 0.0 {
        return Ok(Ok(b));
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Ok(Err(RootError::NotBracketed { lo, hi, flo: fa, fhi: fb }));
    }
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol || m == a || m == b {
            return Ok(Ok(m));
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(Ok(m));
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Ok(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn brent_finds_cos_root() {
        let mut f = |x: f64| Ok::<_, Infallible>(x.cos());
        let r = brent(&mut f, 1.0, 2.0, 1e-14).unwrap().unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn brent_reports_missing_bracket() {
        let mut f = |x: f64| Ok::<_, Infallible>(x * x + 1.0);
        assert!(matches!(
            brent(&mut f, -1.0, 1.0, 1e-12).unwrap(),
            Err(RootError::NotBracketed { .. })
        ));
    }

    #[test]
    fn bisect_on_cubic() {
        let mut f = |x: f64| Ok::<_, Infallible>(x * x * x);
        let r = bisect(&mut f, -0.3, 1.0, 1e-15).unwrap().unwrap();
        assert!(r.abs() < 1e-14);
    }
}

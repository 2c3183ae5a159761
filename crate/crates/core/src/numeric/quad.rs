//! One-dimensional quadrature.

use std::sync::OnceLock;

/// Evaluation cap per call. Past it, remaining panels keep their current
/// estimate; this bounds the run time on integrands with a non-integrable
/// spike, where refinement would otherwise never stop.
pub const SIMPSON_MAX_EVALS: usize = 2_000_000;

/// Adaptive Simpson with Richardson correction. `tol` is absolute on the
/// whole interval. Works for `b < a` (returns the oriented integral).
pub fn adaptive_simpson<E, F>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    adaptive_simpson_with_ends(f, a, b, fa, fb, tol)
}

/// Same as [`adaptive_simpson`] with the endpoint values supplied, so a
/// caller sweeping consecutive intervals evaluates each node once.
pub fn adaptive_simpson_with_ends<E, F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    tol: f64,
) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = SIMPSON_MAX_EVALS;
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48, &mut budget)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<E, F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    *budget = budget.saturating_sub(2);
    if depth == 0 || *budget == 0 || delta.abs() <= 15.0 * tol || (m - a).abs() < 1e-15 * a.abs().max(1.0) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?)
}

const GK15_XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK15_WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK15_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Single Gauss–Kronrod 7/15 panel: `(kronrod, |kronrod − gauss|)`.
fn gk15<E, F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc * GK15_WGK[7];
    let mut gauss = fc * GK15_WG[3];
    for j in 0..7 {
        let dx = h * GK15_XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        kron += GK15_WGK[j] * s;
        if j % 2 == 1 {
            gauss += GK15_WG[j / 2] * s;
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

/// Adaptive Gauss–Kronrod (7/15) with global bisection. The integrand is
/// never evaluated at the endpoints, which makes it suitable for integrable
/// endpoint singularities that have been softened by substitution.
pub fn adaptive_gk<E, F>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    if a == b {
        return Ok(0.0);
    }
    // global subdivision: always split the panel with the largest error
    let (v, e) = gk15(f, a, b)?;
    let mut panels = vec![(a, b, v, e)];
    for _ in 0..GK_MAX_PANELS {
        let total: f64 = panels.iter().map(|p| p.3).sum();
        if total <= tol {
            break;
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = panels[i];
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let (v1, e1) = gk15(f, lo, mid)?;
        let (v2, e2) = gk15(f, mid, hi)?;
        panels[i] = (lo, mid, v1, e1);
        panels.push((mid, hi, v2, e2));
    }
    Ok(panels.iter().map(|p| p.2).sum())
}

const GK_MAX_PANELS: usize = 4000;

const GL_ORDER: usize = 20;

fn gauss_legendre_rule() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut x = [0.0; GL_ORDER];
        let mut w = [0.0; GL_ORDER];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// Fixed 20-point Gauss–Legendre on `[a, b]` (exact to degree 39).
pub fn gauss_legendre<E, F>(f: &mut F, a: f64, b: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (x, w) = gauss_legendre_rule();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..GL_ORDER {
        acc += w[i] * f(c + h * x[i])?;
    }
    Ok(acc * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<f64, Infallible> {
        move |x| Ok(f(x))
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&mut ok(f64::sin), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&mut ok(f64::exp), 1.0, 0.0, 1e-12).unwrap();
        assert!((v + (std::f64::consts::E - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn gk_handles_inverse_sqrt_endpoint() {
        let v = adaptive_gk(&mut ok(|x: f64| 1.0 / x.sqrt()), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let v = gauss_legendre(&mut ok(|x: f64| x.powi(39) + 3.0 * x.powi(12)), -1.0, 1.0).unwrap();
        assert!((v - 6.0 / 13.0).abs() < 1e-14);
        let v = gauss_legendre(&mut ok(|x: f64| x * x), 0.0, 3.0).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
    }
}

//! Numerical building blocks: quadrature, bracketed roots, Richardson
//! differencing and phase unwrapping.

pub mod quad;
pub mod roots;

use std::f64::consts::PI;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Continues an unwrapped phase: returns the representative of `raw`
/// (mod 2π) closest to `prev`.
pub fn unwrap_next(prev: f64, raw: f64) -> f64 {
    prev + wrap_angle(raw - prev)
}

/// Second derivative at `x` by central differences of `f`, refined with two
/// levels of Richardson extrapolation starting at step `h`.
pub fn richardson_second_derivative<E, F>(f: &mut F, x: f64, h: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let f0 = f(x)?;
    let mut d = [0.0; 3];
    for (k, dk) in d.iter_mut().enumerate() {
        let s = h / (1 << k) as f64;
        *dk = (f(x + s)? - 2.0 * f0 + f(x - s)?) / (s * s);
    }
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    Ok((16.0 * r1[1] - r1[0]) / 15.0)
}

/// First and second derivative at `x` plus the third and fourth, all from
/// central differences with Richardson refinement. Returns `[f', f'', f''', f'''']`.
pub fn richardson_derivatives<E, F>(f: &mut F, x: f64, h: f64) -> Result<[f64; 4], E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let f0 = f(x)?;
    let levels = 3;
    let mut est = [[0.0; 3]; 4];
    for k in 0..levels {
        let s = h / (1 << k) as f64;
        let (p1, m1) = (f(x + s)?, f(x - s)?);
        let (p2, m2) = (f(x + 2.0 * s)?, f(x - 2.0 * s)?);
        est[0][k] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * s);
        est[1][k] = (-(p2 + m2) + 16.0 * (p1 + m1) - 30.0 * f0) / (12.0 * s * s);
        est[2][k] = ((p2 - m2) - 2.0 * (p1 - m1)) / (2.0 * s * s * s);
        est[3][k] = ((p2 + m2) - 4.0 * (p1 + m1) + 6.0 * f0) / (s * s * s * s);
    }
    // leading error orders: h^4, h^4, h^2, h^2
    let orders = [4, 4, 2, 2];
    let mut out = [0.0; 4];
    for (i, row) in est.iter().enumerate() {
        let p = orders[i] as i32;
        let r = 2f64.powi(p);
        let a = (r * row[1] - row[0]) / (r - 1.0);
        let b = (r * row[2] - row[1]) / (r - 1.0);
        let r2 = 2f64.powi(p + 2);
        out[i] = (r2 * b - a) / (r2 - 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn unwrap_follows_rotation() {
        let mut prev = 0.0;
        for k in 1..=100 {
            let t = -0.1 * k as f64;
            prev = unwrap_next(prev, wrap_angle(t));
            assert!((prev - t).abs() < 1e-12);
        }
    }

    #[test]
    fn richardson_on_exp() {
        let mut f = |x: f64| Ok::<_, Infallible>((-0.5 * x * x).exp());
        let d2 = richardson_second_derivative(&mut f, 0.0, 0.05).unwrap();
        assert!((d2 + 1.0).abs() < 1e-10);
        let d = richardson_derivatives(&mut |x: f64| Ok::<_, Infallible>(x.sin()), 0.3, 0.1).unwrap();
        let exact = [0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos(), 0.3f64.sin()];
        for i in 0..4 {
            assert!((d[i] - exact[i]).abs() < 1e-7, "{i}: {} vs {}", d[i], exact[i]);
        }
    }
}

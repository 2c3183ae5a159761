//! Initial conditions and the validity domain `q² + q'² ≤ 1`.

use serde::{Deserialize, Serialize};

use super::{FamilyError, QFamily};
use crate::numeric::quad::gauss_legendre;
use crate::numeric::roots::bisect;
use crate::params::TimeGrid;

/// Pass threshold on each initial-condition residual.
pub const INITIAL_CONDITION_TOL: f64 = 1e-9;
/// Scan points per unit τ when mapping the validity domain.
pub const SCAN_DENSITY: f64 = 200.0;

/// Gap values down to `-GAP_NEG_TOL` count as on the boundary, not outside.
pub(crate) const GAP_NEG_TOL: f64 = 1e-14;
/// Half-width of the neighbourhood of a saturation event in which the gap is
/// integrated from the event instead of evaluated as `1 − q² − q'²`.
pub(crate) const GAP_WINDOW: f64 = 0.25;
const EVENT_GAP_TOL: f64 = 1e-12;
const LOCALIZED_TOL: f64 = 1e-6;
const MIN_INTERVAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionReport {
    /// `|q(0) − 1|`, `|q'(0)|`, `|q''(0) + 1|`.
    pub residuals: [f64; 3],
    pub pass: bool,
}

pub fn validate_initial_conditions(f: &QFamily) -> Result<InitialConditionReport, FamilyError> {
    let s = f.sample(0.0)?;
    let residuals = [(s.q - 1.0).abs(), s.q1.abs(), (s.q2 + 1.0).abs()];
    let pass = residuals.iter().all(|r| *r < INITIAL_CONDITION_TOL);
    Ok(InitialConditionReport { residuals, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Disjoint, sorted closed intervals where `1 − q² − q'² ≥ 0`.
    pub intervals: Vec<(f64, f64)>,
    /// Touching zeros of the gap (`|z| = 1`), always including τ = 0.
    pub saturation_events: Vec<f64>,
    /// `|z| ≡ 1` on the whole scan.
    pub identically_saturated: bool,
    /// `q, q'' → 0` or `q'' → −q` at both ends of the scan.
    pub localized: bool,
    /// `q'' ≥ −q` everywhere sampled, i.e. `J ≥ 0`.
    pub positive: bool,
    /// `0 < q'² < 1 − q²` at every sampled τ ≠ 0.
    pub bounded: bool,
    pub scanned: (f64, f64),
}

impl ValidityReport {
    pub fn contains(&self, tau: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| tau >= lo && tau <= hi)
    }

    /// True when one interval covers all of `[lo, hi]`.
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= lo && hi <= b)
    }

    /// The interval containing τ = 0.
    pub fn origin_interval(&self) -> Option<(f64, f64)> {
        self.intervals.iter().copied().find(|&(lo, hi)| lo <= 0.0 && 0.0 <= hi)
    }

    pub fn describe_intervals(&self) -> String {
        if self.intervals.is_empty() {
            return "none".to_string();
        }
        self.intervals
            .iter()
            .map(|(a, b)| format!("[{a:.6}, {b:.6}]"))
            .collect::<Vec<_>>()
            .join(" U ")
    }
}

/// Event closest to `tau`, if within [`GAP_WINDOW`].
pub(crate) fn nearest_event(events: &[f64], tau: f64) -> Option<f64> {
    events
        .iter()
        .copied()
        .filter(|e| (tau - e).abs() < GAP_WINDOW)
        .min_by(|a, b| (tau - a).abs().total_cmp(&(tau - b).abs()))
}

/// `1 − q² − q'²` with the cancellation near saturation events removed:
/// close to an event `τ_s` it is computed as `−2∫_{τ_s}^{τ} q'(q'' + q) ds`,
/// which is exact because the gap vanishes at the event.
pub(crate) fn compensated_gap(f: &QFamily, tau: f64, events: &[f64]) -> Result<f64, FamilyError> {
    match nearest_event(events, tau) {
        Some(center) if tau != center => {
            let mut integrand = |s: f64| -> Result<f64, FamilyError> {
                let p = f.sample(s)?;
                Ok(p.q1 * p.curvature())
            };
            Ok(-2.0 * gauss_legendre(&mut integrand, center, tau)?)
        }
        Some(_) => Ok(0.0),
        None => Ok(f.sample(tau)?.gap()),
    }
}

fn scan_points(lo: f64, hi: f64) -> Vec<f64> {
    let step = 1.0 / SCAN_DENSITY;
    let k0 = (lo / step).ceil() as i64;
    let k1 = (hi / step).floor() as i64;
    let mut pts = Vec::with_capacity((k1 - k0 + 3).max(2) as usize);
    if (k0 as f64) * step > lo {
        pts.push(lo);
    }
    for k in k0..=k1 {
        pts.push(k as f64 * step);
    }
    if pts.last().is_none_or(|&t| t < hi) {
        pts.push(hi);
    }
    pts
}

/// Maps the validity domain over the grid's span (extended to include τ = 0).
pub fn validity_domain(f: &QFamily, grid: &TimeGrid) -> Result<ValidityReport, FamilyError> {
    let (lo, hi) = grid.span_with_origin();
    validity_domain_on(f, lo, hi)
}

pub fn validity_domain_on(f: &QFamily, lo: f64, hi: f64) -> Result<ValidityReport, FamilyError> {
    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
    let pts = scan_points(lo, hi);
    let samples = pts.iter().map(|&t| f.sample(t)).collect::<Result<Vec<_>, _>>()?;

    let saturated = f.identically_saturated() || samples.iter().all(|s| s.gap().abs() < EVENT_GAP_TOL);
    let localized = {
        let ends = [samples[0], samples[samples.len() - 1]];
        ends.iter().all(|s| {
            (s.q.abs() < LOCALIZED_TOL && s.q2.abs() < LOCALIZED_TOL)
                || s.curvature().abs() < LOCALIZED_TOL
        })
    };
    let positive = samples.iter().all(|s| s.curvature() >= -1e-12);

    if saturated {
        return Ok(ValidityReport {
            intervals: vec![(lo, hi)],
            saturation_events: vec![0.0],
            identically_saturated: true,
            localized,
            positive,
            bounded: false,
            scanned: (lo, hi),
        });
    }

    // interior touching zeros: local minima of the gap that reach zero
    let mut events = vec![0.0];
    let direct: Vec<f64> = samples.iter().map(|s| s.gap()).collect();
    for k in 1..pts.len() - 1 {
        let (gm, g0, gp) = (direct[k - 1], direct[k], direct[k + 1]);
        if !(g0 <= gm && g0 <= gp && g0.abs() < 1e-6) || pts[k].abs() < 2.0 / SCAN_DENSITY {
            continue;
        }
        // g' = −2q'(q'' + q); at a touching zero with |q| = 1 the simple zero
        // is q', and N vanishes there too, so bisect the factor that changes sign
        let (sm, sp) = (samples[k - 1], samples[k + 1]);
        let use_q1 = sm.q1.signum() != sp.q1.signum();
        let mut factor = |t: f64| -> Result<f64, FamilyError> {
            let s = f.sample(t)?;
            Ok(if use_q1 { s.q1 } else { s.curvature() })
        };
        let xtol = 1e-13 * pts[k].abs().max(1.0);
        if let Ok(t) = bisect(&mut factor, pts[k - 1], pts[k + 1], xtol)? {
            if f.sample(t)?.gap().abs() < EVENT_GAP_TOL
                && events.iter().all(|e: &f64| (e - t).abs() > 2.0 / SCAN_DENSITY)
            {
                events.push(t);
            }
        }
    }
    events.sort_by(f64::total_cmp);

    let gaps = pts
        .iter()
        .map(|&t| compensated_gap(f, t, &events))
        .collect::<Result<Vec<_>, _>>()?;
    // the compensated gap is accurate to ~1e-16 δ² at distance δ from an event
    let is_valid = |t: f64, g: f64| match nearest_event(&events, t) {
        Some(e) => g >= -1e-15 * (t - e).powi(2),
        None => g >= -GAP_NEG_TOL,
    };

    let mut classify = |t: f64| -> Result<f64, FamilyError> {
        Ok(if is_valid(t, compensated_gap(f, t, &events)?) { 1.0 } else { -1.0 })
    };
    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for k in 0..pts.len() {
        let valid = is_valid(pts[k], gaps[k]);
        match (start, valid) {
            (None, true) => {
                start = Some(if k == 0 {
                    pts[0]
                } else {
                    let xtol = 1e-12 * pts[k].abs().max(1.0);
                    bisect(&mut classify, pts[k - 1], pts[k], xtol)?.unwrap_or(pts[k])
                });
            }
            (Some(s), false) => {
                let xtol = 1e-12 * pts[k].abs().max(1.0);
                let end = bisect(&mut classify, pts[k - 1], pts[k], xtol)?.unwrap_or(pts[k - 1]);
                intervals.push((s, end));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, hi));
    }
    intervals.retain(|(a, b)| b - a > MIN_INTERVAL);
    if intervals.is_empty() {
        return Err(FamilyError::DomainEmpty { lo, hi });
    }
    events.retain(|&e| intervals.iter().any(|&(a, b)| e >= a && e <= b));

    let bounded = events.len() == 1
        && samples.iter().zip(&gaps).all(|(s, &g)| s.tau == 0.0 || (s.q1 * s.q1 > 0.0 && g > 0.0));

    Ok(ValidityReport {
        intervals,
        saturation_events: events,
        identically_saturated: false,
        localized,
        positive,
        bounded,
        scanned: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{
        family_arctan_trig, family_cos, family_gauss_cos, family_sinh_exp, family_tanh, QEvaluator,
        QSample,
    };
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn initial_conditions() {
        assert!(validate_initial_conditions(&family_cos()).unwrap().pass);
        assert!(validate_initial_conditions(&family_gauss_cos(0.0).unwrap()).unwrap().pass);

        #[derive(Debug)]
        struct Parabola;
        impl QEvaluator for Parabola {
            fn eval(&self, tau: f64) -> Result<QSample, FamilyError> {
                Ok(QSample::new(tau, 1.0 - tau * tau, -2.0 * tau, -2.0))
            }
        }
        let f = QFamily::custom("parabola", Default::default(), std::sync::Arc::new(Parabola), super::super::Parity::Even);
        let r = validate_initial_conditions(&f).unwrap();
        assert!(!r.pass);
        assert_eq!(r.residuals, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn gauss_single_positive_bounded_pulse() {
        let r = validity_domain_on(&family_gauss_cos(0.0).unwrap(), -6.0, 6.0).unwrap();
        assert_eq!(r.intervals, vec![(-6.0, 6.0)]);
        assert_eq!(r.saturation_events, vec![0.0]);
        assert!(r.localized && r.positive && r.bounded);
    }

    #[test]
    fn sinh_exp_negative_a_has_periodic_saturation() {
        let r = validity_domain_on(&family_sinh_exp(-1.0).unwrap(), -7.0, 13.0).unwrap();
        let expect = [-2.0 * PI, 0.0, 2.0 * PI, 4.0 * PI];
        assert_eq!(r.saturation_events.len(), expect.len(), "{:?}", r.saturation_events);
        for (e, x) in r.saturation_events.iter().zip(expect) {
            assert!((e - x).abs() < 1e-9, "{e} vs {x}");
        }
        assert_eq!(r.intervals.len(), 1);
        assert!(!r.localized && !r.bounded, "{r:?}");
    }

    #[test]
    fn cosine_is_identically_saturated() {
        let r = validity_domain_on(&family_cos(), -3.0, 3.0).unwrap();
        assert!(r.identically_saturated);
    }

    #[test]
    fn tanh_domains() {
        for a in [2.0 * 2f64.sqrt(), 2.0, 2f64.sqrt(), 1.0, FRAC_1_SQRT_2, 0.6] {
            let r = validity_domain_on(&family_tanh(a).unwrap(), -6.0, 6.0).unwrap();
            assert_eq!(r.intervals, vec![(-6.0, 6.0)], "a={a}");
        }
        // below 1/(2√2) the gap is negative right after τ = 0
        assert!(matches!(
            validity_domain_on(&family_tanh(0.3).unwrap(), -6.0, 6.0),
            Err(FamilyError::DomainEmpty { .. })
        ));
        let r = validity_domain_on(&family_tanh(0.4).unwrap(), -6.0, 6.0).unwrap();
        assert_eq!(r.intervals.len(), 1);
        let (lo, hi) = r.intervals[0];
        assert!(lo > -6.0 && hi < 6.0 && (lo + hi).abs() < 1e-9, "{lo} {hi}");
        // boundary is a genuine zero of the gap
        let g = family_tanh(0.4).unwrap().sample(hi).unwrap().gap();
        assert!(g.abs() < 1e-10);
    }

    #[test]
    fn tanh_gap_positive_above_threshold() {
        let f = family_tanh(1.0).unwrap();
        for i in 1..=1000 {
            let t = 0.01 * i as f64;
            assert!(compensated_gap(&f, t, &[0.0]).unwrap() > 0.0);
        }
    }

    #[test]
    fn arctan_trig_events_each_period() {
        let r = validity_domain_on(&family_arctan_trig(0.5).unwrap(), 0.0, 13.0).unwrap();
        assert_eq!(r.saturation_events.len(), 3, "{:?}", r.saturation_events);
        assert!((r.saturation_events[2] - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn compensated_gap_is_accurate_near_origin() {
        // gauss b = 0: 1 − q² − q'² = 1 − (1 + τ²) e^{−τ²} = τ⁴/2 − τ⁶/3 + τ⁸/8 − …
        let f = family_gauss_cos(0.0).unwrap();
        for t in [1e-3f64, 3e-3, 1e-2, 0.1] {
            let series: f64 = (2..12)
                .map(|n| {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let fact: f64 = (1..=n).map(|k| k as f64).product();
                    sign * (n - 1) as f64 * (t * t).powi(n as i32) / fact
                })
                .sum();
            let got = compensated_gap(&f, t, &[0.0]).unwrap();
            assert!(((got - series) / series).abs() < 1e-9, "t={t}: {got} vs {series}");
        }
    }
}

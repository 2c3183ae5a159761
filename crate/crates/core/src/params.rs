//! Model parameters and dimensionless time grids.
//!
//! Everything below the I/O boundary works in `τ = h·t` with the control
//! expressed as `J/h`. The splitting `h` only converts back to physical units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("splitting h must be > 0 for the q pipeline (got {0})")]
    NonPositiveSplitting(f64),
    #[error("tolerance `{name}` must be > 0 (got {value})")]
    NonPositiveTolerance { name: &'static str, value: f64 },
    #[error("time grid needs at least one sample")]
    EmptyGrid,
    #[error("time grid must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },
    #[error("invalid grid specification: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Physical splitting (angular frequency).
    pub h: f64,
    /// Absolute tolerance for the K quadrature.
    pub tol_quad: f64,
    /// Infidelity threshold used when comparing against the numeric oracle.
    pub tol_verify: f64,
    /// Half-width, in τ, of the window around each saturation event where
    /// J and dK/dτ come from the local series instead of the direct ratio.
    pub eps_singular: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            h: 1.0,
            tol_quad: 1e-12,
            tol_verify: 1e-8,
            eps_singular: 1e-3,
        }
    }
}

impl ModelParams {
    pub fn with_h(h: f64) -> Result<Self, ParamError> {
        let p = ModelParams { h, ..Default::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(ParamError::NonPositiveSplitting(self.h));
        }
        self.validate_tolerances()
    }

    /// Checks only the tolerances; used by the zero-splitting mode.
    pub fn validate_tolerances(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("tol_quad", self.tol_quad),
            ("tol_verify", self.tol_verify),
            ("eps_singular", self.eps_singular),
        ] {
            if !(value > 0.0) {
                return Err(ParamError::NonPositiveTolerance { name, value });
            }
        }
        Ok(())
    }
}

/// Strictly increasing samples of τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    taus: Vec<f64>,
}

impl TimeGrid {
    pub fn new(taus: Vec<f64>) -> Result<Self, ParamError> {
        if taus.is_empty() {
            return Err(ParamError::EmptyGrid);
        }
        if let Some(index) = taus.iter().position(|t| !t.is_finite()) {
            return Err(ParamError::NotIncreasing { index });
        }
        if let Some(i) = taus.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ParamError::NotIncreasing { index: i + 1 });
        }
        Ok(TimeGrid { taus })
    }

    /// `n` evenly spaced points on `[lo, hi]`, endpoints included.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self, ParamError> {
        if n < 2 || !(hi > lo) {
            return Err(ParamError::BadSpec(format!(
                "uniform grid needs n >= 2 and hi > lo (n={n}, lo={lo}, hi={hi})"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let taus = (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
            .collect();
        TimeGrid::new(taus)
    }

    /// Uniform grid with spacing as close to `step` as fits `[lo, hi]` exactly.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self, ParamError> {
        if !(step > 0.0) {
            return Err(ParamError::BadSpec(format!("step must be > 0 (got {step})")));
        }
        let n = ((hi - lo) / step).round().max(1.0) as usize + 1;
        TimeGrid::uniform(lo, hi, n)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.taus[0]
    }

    pub fn last(&self) -> f64 {
        self.taus[self.taus.len() - 1]
    }

    /// Closed interval spanned by the grid together with τ = 0, since every
    /// evolution is anchored at the origin.
    pub fn span_with_origin(&self) -> (f64, f64) {
        (self.first().min(0.0), self.last().max(0.0))
    }

    /// Index of the first node with τ ≥ 0 (equal to `len()` if none).
    pub fn origin_split(&self) -> usize {
        self.taus.partition_point(|&t| t < 0.0)
    }

    /// Spacing if the grid is uniform to relative `1e-9`.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.taus.len() < 2 {
            return None;
        }
        let step = (self.last() - self.first()) / (self.taus.len() - 1) as f64;
        let ok = self
            .taus
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.max(1.0));
        ok.then_some(step)
    }

    pub fn max_spacing(&self) -> f64 {
        self.taus.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelParams::default().validate().unwrap();
        assert!(ModelParams::with_h(0.0).is_err());
        let bad = ModelParams { tol_quad: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ParamError::NonPositiveTolerance { .. })));
    }

    #[test]
    fn grid_construction() {
        let g = TimeGrid::with_step(-6.0, 6.0, 1e-3).unwrap();
        assert_eq!(g.len(), 12001);
        assert_eq!(g.first(), -6.0);
        assert_eq!(g.last(), 6.0);
        assert!((g.uniform_step().unwrap() - 1e-3).abs() < 1e-15);
        assert_eq!(g.origin_split(), 6000);
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![]).is_err());
        let g = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(g.span_with_origin(), (0.0, 2.0));
    }
}

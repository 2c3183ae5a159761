use super::{FamilyError, QEvaluator, QSample};

/// Natural cubic spline through `(τ_i, q_i)`. `q'` and `q''` come from the
/// spline itself, so they are only as accurate as the sampling allows.
#[derive(Debug, Clone)]
pub struct SampledQ {
    taus: Vec<f64>,
    qs: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl SampledQ {
    pub fn new(taus: Vec<f64>, qs: Vec<f64>) -> Result<Self, FamilyError> {
        let bad = |msg: &str| FamilyError::InvalidParameter {
            family: "samples".into(),
            message: msg.into(),
        };
        if taus.len() != qs.len() {
            return Err(bad("tau and q columns differ in length"));
        }
        if taus.len() < 4 {
            return Err(bad("need at least 4 samples"));
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("tau samples must be strictly increasing"));
        }
        let n = taus.len();
        // Thomas algorithm for the natural spline system.
        let mut m = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = taus[i] - taus[i - 1];
            let h1 = taus[i + 1] - taus[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let c = h1 / 6.0;
            let d = (qs[i + 1] - qs[i]) / h1 - (qs[i] - qs[i - 1]) / h0;
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Ok(SampledQ { taus, qs, m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.taus[0], self.taus[self.taus.len() - 1])
    }
}

impl QEvaluator for SampledQ {
    fn eval(&self, tau: f64) -> Result<QSample, FamilyError> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&tau) {
            return Err(FamilyError::OutOfRange { family: "samples".into(), tau, lo, hi });
        }
        let i = self.taus.partition_point(|&t| t <= tau).clamp(1, self.taus.len() - 1) - 1;
        let (x0, x1) = (self.taus[i], self.taus[i + 1]);
        let h = x1 - x0;
        let (y0, y1) = (self.qs[i], self.qs[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let a = (x1 - tau) / h;
        let b = (tau - x0) / h;
        let q = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let q1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let q2 = a * m0 + b * m1;
        Ok(QSample::new(tau, q, q1, q2))
    }
}

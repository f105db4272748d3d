//! Generalized Pareto distribution of threshold exceedances.
//!
//! For an excess `y = x - d > 0` the CCDF is
//!
//! ```text
//! P(Y > y) = (1 + shape * y / scale)^(-1/shape)   shape != 0
//!          = exp(-y / scale)                      shape  = 0
//! ```
//!
//! with mean `scale / (1 - shape)` (shape < 1) and variance
//! `scale^2 / ((1 - shape)^2 (1 - 2 shape))` (shape < 1/2). For
//! `shape < 0` the support ends at `y = -scale / shape`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::EvtError;

/// Shape magnitude below which the CCDF uses the exponential limit,
/// avoiding catastrophic cancellation in `(1 + xi y / s)^(-1/xi)`.
pub const SHAPE_ZERO_EPS_CCDF: f64 = 1e-9;
/// Shape magnitude below which likelihood and gradients use the
/// exponential branch.
pub const SHAPE_ZERO_EPS_FIT: f64 = 1e-6;

/// GPD characteristic parameters plus the threshold they were fit over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    /// Scale parameter, strictly positive.
    pub scale: f64,
    /// Shape parameter: > 0 heavy tail, = 0 exponential, < 0 finite endpoint.
    pub shape: f64,
    /// Threshold `d` the excesses are measured over.
    pub threshold: f64,
}

/// Mean and variance where they exist (shape < 1 and shape < 1/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdMoments {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

impl GpdParams {
    pub fn new(scale: f64, shape: f64, threshold: f64) -> Result<Self, EvtError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(EvtError::InvalidScale(scale));
        }
        Ok(Self {
            scale,
            shape,
            threshold,
        })
    }

    /// Upper endpoint of the excess support for short tails (shape < 0).
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.shape < 0.0).then(|| -self.scale / self.shape)
    }

    /// CCDF of the excess value. Excesses at or past a finite endpoint get
    /// probability zero; nonpositive excesses get one.
    pub fn ccdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        if self.shape.abs() < SHAPE_ZERO_EPS_CCDF {
            return (-y / self.scale).exp();
        }
        let t = 1.0 + self.shape * y / self.scale;
        if t <= 0.0 {
            // only reachable for shape < 0, beyond the endpoint
            return 0.0;
        }
        t.powf(-1.0 / self.shape)
    }

    /// Inverse of [`GpdParams::ccdf`]: the excess with tail probability `q`.
    pub fn quantile_ccdf(&self, q: f64) -> f64 {
        if self.shape.abs() < SHAPE_ZERO_EPS_CCDF {
            -self.scale * q.ln()
        } else {
            self.scale / self.shape * (q.powf(-self.shape) - 1.0)
        }
    }

    pub fn moments(&self) -> GpdMoments {
        let mean = (self.shape < 1.0).then(|| self.scale / (1.0 - self.shape));
        let variance = (self.shape < 0.5).then(|| {
            self.scale * self.scale
                / ((1.0 - self.shape) * (1.0 - self.shape) * (1.0 - 2.0 * self.shape))
        });
        GpdMoments { mean, variance }
    }

    /// Inverse-CDF sample of the excess value.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        self.quantile_ccdf(1.0 - u)
    }

    /// GEV scale implied by these GPD parameters at GEV location
    /// `location`: `sigma = scale + shape * (location - threshold)`.
    pub fn implied_gev_scale(&self, location: f64) -> f64 {
        self.scale + self.shape * (location - self.threshold)
    }
}

/// GPD log-likelihood of a set of excesses. Returns negative infinity if
/// any excess lies outside the support.
pub fn log_likelihood(params: &GpdParams, excesses: &[f64]) -> f64 {
    let k = excesses.len() as f64;
    let scale = params.scale;
    let shape = params.shape;
    if shape.abs() < SHAPE_ZERO_EPS_FIT {
        let sum: f64 = excesses.iter().sum();
        return -k * scale.ln() - sum / scale;
    }
    let mut acc = 0.0;
    for &y in excesses {
        let t = 1.0 + shape * y / scale;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += t.ln();
    }
    -k * scale.ln() - (1.0 + 1.0 / shape) * acc
}

/// Analytic gradient `(d/d scale, d/d shape)` of [`log_likelihood`].
///
/// The shape component at the exponential branch is the analytic limit
/// `sum(u_i^2 / 2 - u_i)` with `u_i = y_i / scale`.
pub fn log_likelihood_grad(params: &GpdParams, excesses: &[f64]) -> [f64; 2] {
    let k = excesses.len() as f64;
    let scale = params.scale;
    let shape = params.shape;

    if shape.abs() < SHAPE_ZERO_EPS_FIT {
        let mut d_scale = -k / scale;
        let mut d_shape = 0.0;
        for &y in excesses {
            let u = y / scale;
            d_scale += u / scale;
            d_shape += u * u / 2.0 - u;
        }
        return [d_scale, d_shape];
    }

    let mut sum_log = 0.0; // sum ln(1 + shape y / scale)
    let mut sum_ratio = 0.0; // sum y / (1 + shape y / scale)
    for &y in excesses {
        let t = 1.0 + shape * y / scale;
        if t <= 0.0 {
            return [f64::NAN, f64::NAN];
        }
        sum_log += t.ln();
        sum_ratio += y / t;
    }
    let d_scale = -k / scale + (1.0 + shape) / (scale * scale) * sum_ratio;
    let d_shape =
        sum_log / (shape * shape) - (1.0 + 1.0 / shape) / scale * sum_ratio;
    [d_scale, d_shape]
}

/// Whether every excess lies inside the GPD support.
pub fn support_ok(params: &GpdParams, excesses: &[f64]) -> bool {
    match params.upper_endpoint() {
        Some(end) => excesses.iter().all(|&y| y < end),
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccdf_exponential_limit() {
        let p = GpdParams::new(1.0, 0.0, 0.0).unwrap();
        assert!((p.ccdf(1.0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn ccdf_unit_shape() {
        let p = GpdParams::new(1.0, 1.0, 0.0).unwrap();
        assert!((p.ccdf(1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ccdf_zero_beyond_endpoint() {
        // endpoint -scale/shape = 4
        let p = GpdParams::new(2.0, -0.5, 0.0).unwrap();
        assert_eq!(p.ccdf(4.0), 0.0);
        assert_eq!(p.ccdf(5.0), 0.0);
        assert!(p.ccdf(3.9) > 0.0);
        assert_eq!(p.upper_endpoint(), Some(4.0));
    }

    #[test]
    fn moments_exponential() {
        let m = GpdParams::new(2.0, 0.0, 0.0).unwrap().moments();
        assert_eq!(m.mean, Some(2.0));
        assert_eq!(m.variance, Some(4.0));
    }

    #[test]
    fn moments_heavy() {
        let m = GpdParams::new(1.0, 0.25, 0.0).unwrap().moments();
        assert!((m.mean.unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((m.variance.unwrap() - 1.0 / (0.75 * 0.75 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn moments_undefined_variance() {
        let m = GpdParams::new(1.0, 0.6, 0.0).unwrap().moments();
        assert_eq!(m.mean, Some(2.5));
        assert_eq!(m.variance, None);

        let m = GpdParams::new(1.0, 1.2, 0.0).unwrap().moments();
        assert_eq!(m.mean, None);
        assert_eq!(m.variance, None);
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(GpdParams::new(0.0, 0.1, 0.0).is_err());
        assert!(GpdParams::new(-1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn stationarity_of_single_sample_exponential() {
        // d loglik / d scale of the exponential branch vanishes at scale = y.
        let p = GpdParams::new(3.0, 0.0, 0.0).unwrap();
        let g = log_likelihood_grad(&p, &[3.0]);
        assert!(g[0].abs() < 1e-12, "scale gradient {} not zero", g[0]);
    }

    #[test]
    fn loglik_outside_support_is_neg_infinity() {
        let p = GpdParams::new(1.0, -0.5, 0.0).unwrap();
        assert_eq!(log_likelihood(&p, &[1.0, 3.0]), f64::NEG_INFINITY);
        assert!(!support_ok(&p, &[1.0, 3.0]));
        assert!(support_ok(&p, &[1.0, 1.9]));
    }
}

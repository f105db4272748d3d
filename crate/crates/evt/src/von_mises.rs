//! Analytic characterization of the limiting GEV parameters from a known
//! distribution, given its quantile function, density, and density
//! derivative:
//!
//! ```text
//! location = F^-1(1 - 1/n)
//! scale    = 1 / (n f(F^-1(1 - 1/n)))
//! shape    = -1 - lim_{x -> x*} (1 - F(x)) f'(x) / f(x)^2
//! ```
//!
//! The shape limit is evaluated at quantile points approaching the upper
//! endpoint (tail probabilities 1/n, 1/2n, 1/4n, ...) and accepted once
//! the last two evaluations agree to a relative 1e-3.

use crate::error::EvtError;
use crate::gev::GevParams;

/// Relative agreement required between the last two shape evaluations.
const SHAPE_CONVERGENCE_TOL: f64 = 1e-3;
/// Largest `n_j` used when chasing the limit; beyond this, `1 - 1/n_j`
/// is no longer resolvable in f64.
const MAX_SHAPE_N: f64 = 1e15;

pub fn von_mises_params<Q, F, D>(
    quantile: Q,
    pdf: F,
    pdf_derivative: D,
    n: u64,
) -> Result<GevParams, EvtError>
where
    Q: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if n < 2 {
        return Err(EvtError::InvalidParameter(format!(
            "block size n must be >= 2, got {n}"
        )));
    }
    let n = n as f64;
    let location = quantile(1.0 - 1.0 / n);
    let density_at_location = pdf(location);
    if !(density_at_location > 0.0) || !density_at_location.is_finite() {
        return Err(EvtError::InvalidParameter(format!(
            "density at the (1 - 1/n) quantile must be positive, got {density_at_location}"
        )));
    }
    let scale = 1.0 / (n * density_at_location);

    // Shape limit along tail probabilities 1/n_j with n_j doubling.
    let mut evaluations = Vec::new();
    let mut n_j = n;
    while n_j <= MAX_SHAPE_N {
        let x = quantile(1.0 - 1.0 / n_j);
        let f = pdf(x);
        if !(f > 0.0) || !f.is_finite() {
            break;
        }
        let g = -1.0 - (1.0 / n_j) * pdf_derivative(x) / (f * f);
        if !g.is_finite() {
            break;
        }
        evaluations.push(g);
        // Already numerically settled; later points only risk roundoff.
        if evaluations.len() >= 2 {
            let last = evaluations[evaluations.len() - 1];
            let prev = evaluations[evaluations.len() - 2];
            if (last - prev).abs() <= 1e-12 * last.abs().max(1.0) {
                break;
            }
        }
        n_j *= 2.0;
    }

    if evaluations.len() < 2 {
        return Err(EvtError::NonConvergentShape {
            prev: f64::NAN,
            last: evaluations.first().copied().unwrap_or(f64::NAN),
        });
    }
    let last = evaluations[evaluations.len() - 1];
    let prev = evaluations[evaluations.len() - 2];
    if (last - prev).abs() > SHAPE_CONVERGENCE_TOL * last.abs().max(1.0) {
        return Err(EvtError::NonConvergentShape { prev, last });
    }

    GevParams::new(location, scale, last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_shape_is_minus_one() {
        // Uniform(0,1): f = 1, f' = 0 on the support.
        let p = von_mises_params(|p| p, |_| 1.0, |_| 0.0, 100).unwrap();
        assert!((p.shape - (-1.0)).abs() < 1e-9, "shape {}", p.shape);
        assert!((p.location - 0.99).abs() < 1e-12);
        assert!((p.scale - 0.01).abs() < 1e-12);
    }

    #[test]
    fn exponential_shape_is_zero() {
        // Exp(lambda): location ln(n)/lambda, scale 1/lambda, shape 0.
        let lambda = 2.0;
        let p = von_mises_params(
            |p: f64| -(1.0 - p).ln() / lambda,
            |x: f64| lambda * (-lambda * x).exp(),
            |x: f64| -lambda * lambda * (-lambda * x).exp(),
            1000,
        )
        .unwrap();
        assert!(p.shape.abs() < 1e-9, "shape {}", p.shape);
        assert!((p.location - (1000f64).ln() / lambda).abs() < 1e-9);
        assert!((p.scale - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pareto_shape_is_inverse_alpha() {
        // CCDF x^-alpha on x >= 1.
        let alpha = 2.5;
        let p = von_mises_params(
            |p: f64| (1.0 - p).powf(-1.0 / alpha),
            |x: f64| alpha * x.powf(-alpha - 1.0),
            |x: f64| -alpha * (alpha + 1.0) * x.powf(-alpha - 2.0),
            500,
        )
        .unwrap();
        assert!(
            (p.shape - 1.0 / alpha).abs() < 1e-6,
            "shape {} vs {}",
            p.shape,
            1.0 / alpha
        );
    }

    #[test]
    fn rejects_tiny_n() {
        assert!(von_mises_params(|p| p, |_| 1.0, |_| 0.0, 1).is_err());
    }

    #[test]
    fn nonconvergent_shape_is_reported() {
        // A pathological "derivative" that oscillates with the quantile
        // level never settles.
        let r = von_mises_params(
            |p: f64| -(1.0 - p).ln(),
            |x: f64| (-x).exp(),
            |x: f64| (-x).exp() * (x * 10.0).sin() * 5.0,
            100,
        );
        assert!(matches!(r, Err(EvtError::NonConvergentShape { .. })));
    }
}

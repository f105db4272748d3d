//! Property tests: CCDF/CDF monotonicity and quantile round trips.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailsim_evt::{GevParams, GpdParams};

proptest! {
    /// gpd_ccdf is strictly decreasing in y on the support interior.
    #[test]
    fn gpd_ccdf_strictly_decreasing(
        scale in 0.1f64..5.0,
        shape in -0.9f64..0.9,
        a in 0.01f64..0.99,
        b in 0.01f64..0.99,
    ) {
        let p = GpdParams { scale, shape, threshold: 0.0 };
        // Map (0,1) fractions onto the support so both points are interior.
        let span = p.upper_endpoint().unwrap_or(10.0 * scale);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let y_lo = lo * span;
        let y_hi = hi * span;
        prop_assert!(p.ccdf(y_lo) > p.ccdf(y_hi),
            "ccdf({y_lo}) = {} <= ccdf({y_hi}) = {}", p.ccdf(y_lo), p.ccdf(y_hi));
    }

    /// gev_cdf is nondecreasing in z.
    #[test]
    fn gev_cdf_nondecreasing(
        location in -5.0f64..5.0,
        scale in 0.1f64..5.0,
        shape in -0.9f64..0.9,
        a in -20.0f64..20.0,
        b in -20.0f64..20.0,
    ) {
        let p = GevParams { location, scale, shape };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(p.cdf(lo) <= p.cdf(hi));
    }
}

/// quantile(ccdf) round-trips within 1e-9 relative over 1e4 random
/// (probability, parameter) pairs.
#[test]
fn quantile_ccdf_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10_000 {
        let scale = 0.1 + 5.0 * rng.gen::<f64>();
        let shape = -0.9 + 1.8 * rng.gen::<f64>();
        let q = 1e-6 + rng.gen::<f64>() * (1.0 - 2e-6);
        let p = GpdParams {
            scale,
            shape,
            threshold: 0.0,
        };
        let y = p.quantile_ccdf(q);
        let q_back = p.ccdf(y);
        let rel = (q_back - q).abs() / q;
        assert!(
            rel < 1e-9,
            "round trip failed: scale {scale} shape {shape} q {q} -> y {y} -> {q_back}"
        );
    }
}

//! Extreme-value statistics engine.
//!
//! Two complementary limit laws drive everything here:
//!
//! - block maxima `Z_n = max{X_1..X_n}` converge to a generalized extreme
//!   value (GEV) distribution with location/scale/shape `(mu, sigma, xi)`;
//! - threshold exceedances `Y = X - d | X > d` converge to a generalized
//!   Pareto distribution (GPD) with scale/shape `(sigma~, xi)`.
//!
//! The shape parameter is shared between the two laws and classifies the
//! tail: `xi > 0` heavy, `xi = 0` exponential, `xi < 0` finite endpoint.
//! GPD parameters are estimated by projected gradient ascent on the
//! log-likelihood; the analytic gradient is part of the public surface
//! because federated scenarios exchange it directly.

pub mod error;
pub mod fit;
pub mod gev;
pub mod gpd;
pub mod pot;
pub mod stats;
pub mod von_mises;

pub use error::EvtError;
pub use fit::{fit_gpd_mle, GpdFit};
pub use gev::{fit_gev_mle, GevParams};
pub use gpd::{GpdMoments, GpdParams};
pub use pot::{block_maxima, peaks_over_threshold, ExceedanceSample};
pub use stats::{empirical_quantile, mean, sample_std, sample_variance};
pub use von_mises::von_mises_params;

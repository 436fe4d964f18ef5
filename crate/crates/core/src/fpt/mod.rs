//! Numerical probability kernel for first-passage problems: the inverse
//! Gaussian law, absorbed transition densities, adaptive quadrature and the
//! stopped moments needed for capped (hybrid) rate policies.

mod barrier;
mod inverse_gaussian;
pub mod normal;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;

pub use barrier::{
    absorbed_density, irhp_stopped_moments, key_inequality_sides, match_frequency, stopped_mean,
    stopped_moments_with, survival_before_barrier,
};
pub use inverse_gaussian::{ig_cdf, ig_pdf, ig_sample};
pub(crate) use inverse_gaussian::sample_ig;

/// Scalar drifted Brownian motion `mu t + s B(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftedBM1D {
    pub mu: f64,
    pub s: f64,
}

impl DriftedBM1D {
    pub fn new(mu: f64, s: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonPositiveParameter { name: "mu", value: mu });
        }
        crate::error::positive("s", s)?;
        Ok(DriftedBM1D { mu, s })
    }

    /// The weighted load `sum omega_i N_i(t)` viewed as one process.
    pub fn weighted(params: &SystemParams) -> Self {
        DriftedBM1D {
            mu: params.weighted_drift(),
            s: params.weighted_variance().sqrt(),
        }
    }
}

/// Moments of `tau = tau_M ^ T` and of `W(tau)` for the capped barrier rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedMoments {
    pub e_tau: f64,
    pub e_tau2: f64,
    pub e_w: f64,
    pub e_w2: f64,
    pub p_hit: f64,
}

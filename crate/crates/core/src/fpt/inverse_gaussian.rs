//! Inverse Gaussian law of a first-passage time.

use rand::Rng;
use rand_distr::StandardNormal;

use super::normal;
use crate::analytic::HittingLaw;
use crate::error::{positive, Result};

fn params(law: &HittingLaw) -> Result<(f64, f64)> {
    Ok((positive("ig_mu", law.ig_mu)?, positive("ig_lambda", law.ig_lambda)?))
}

pub fn ig_pdf(law: &HittingLaw, t: f64) -> Result<f64> {
    let (mu, lambda) = params(law)?;
    positive("t", t)?;
    let z = (t - mu) / mu;
    Ok((lambda / (2.0 * std::f64::consts::PI * t * t * t)).sqrt() * (-lambda * z * z / (2.0 * t)).exp())
}

/// `P(tau <= t)`.
pub fn ig_cdf(law: &HittingLaw, t: f64) -> Result<f64> {
    let (mu, lambda) = params(law)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    positive("t", t)?;
    let r = (lambda / t).sqrt();
    let first = normal::cdf(r * (t / mu - 1.0));
    let second = normal::scaled_cdf(2.0 * lambda / mu, -r * (t / mu + 1.0));
    Ok((first + second).min(1.0))
}

/// Michael–Schucany–Haas transform: one normal, one uniform, no rejection.
pub fn ig_sample<R: Rng + ?Sized>(law: &HittingLaw, rng: &mut R) -> f64 {
    sample_ig(law.ig_mu, law.ig_lambda, rng)
}

pub(crate) fn sample_ig<R: Rng + ?Sized>(mu: f64, lambda: f64, rng: &mut R) -> f64 {
    let v: f64 = rng.sample(StandardNormal);
    let r = mu * v * v / (2.0 * lambda);
    // smaller root of the quadratic, written without cancellation
    let x = mu / (1.0 + r + (r * r + 2.0 * r).sqrt());
    let u: f64 = rng.random();
    if u * (mu + x) <= mu {
        x
    } else {
        mu * mu / x
    }
}

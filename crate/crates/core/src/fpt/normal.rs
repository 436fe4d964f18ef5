//! Standard normal density, CDF and log-CDF.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the log-CDF switches to the asymptotic series.
/// `erfc` keeps full relative accuracy down to here and the series has
/// converged to round-off by the time it takes over.
const LOG_CDF_SERIES_BELOW: f64 = -20.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x >= LOG_CDF_SERIES_BELOW {
        if x > 5.0 {
            // Phi(x) = 1 - Phi(-x); ln_1p keeps the tiny complement
            return (-cdf(-x)).ln_1p();
        }
        return cdf(x).ln();
    }
    // Phi(x) ~ phi(x)/|x| * sum_k (-1)^k (2k-1)!! / x^(2k)
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= -(2.0 * k - 1.0) / x2;
        if term.abs() < 1e-17 {
            break;
        }
        sum += term;
        k += 1.0;
    }
    -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + sum.ln()
}

/// `exp(log_factor) * Phi(x)` without overflow when both factors are extreme.
pub fn scaled_cdf(log_factor: f64, x: f64) -> f64 {
    (log_factor + log_cdf(x)).exp()
}

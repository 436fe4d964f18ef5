//! One-sided barrier quantities for a scalar drifted Brownian motion
//! `W(t) = mu t + s B(t)` started at zero.

use super::normal;
use super::quadrature::{integrate, Tolerance};
use super::{DriftedBM1D, StoppedMoments};
use crate::analytic::HittingLaw;
use crate::error::{positive, Error, Result};
use crate::fpt::inverse_gaussian::ig_cdf;

/// Half-width of the spatial integration window in standard deviations.
const SPATIAL_SDS: f64 = 10.0;

/// `P(tau_M > t)` by the reflection formula.
pub fn survival_before_barrier(p: &DriftedBM1D, m: f64, t: f64) -> Result<f64> {
    positive("M", m)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    positive("t", t)?;
    Ok(survival(p, m, t))
}

fn survival(p: &DriftedBM1D, m: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let st = p.s * t.sqrt();
    let direct = normal::cdf((m - p.mu * t) / st);
    let reflected = normal::scaled_cdf(2.0 * p.mu * m / (p.s * p.s), (-m - p.mu * t) / st);
    (direct - reflected).clamp(0.0, 1.0)
}

/// Sub-probability density of `W(T)` on `{tau_M > T}`.
pub fn absorbed_density(p: &DriftedBM1D, m: f64, t: f64, x: f64) -> Result<f64> {
    positive("M", m)?;
    positive("T", t)?;
    Ok(density(p, m, t, x))
}

fn density(p: &DriftedBM1D, m: f64, t: f64, x: f64) -> f64 {
    if x >= m {
        return 0.0;
    }
    let var = p.s * p.s * t;
    let norm = (2.0 * std::f64::consts::PI * var).sqrt();
    let direct = -(x - p.mu * t).powi(2) / (2.0 * var);
    let reflected = 2.0 * p.mu * m / (p.s * p.s) - (x - 2.0 * m - p.mu * t).powi(2) / (2.0 * var);
    let v = (direct.exp() - reflected.exp()) / norm;
    if v < 0.0 && v >= -1e-14 {
        0.0
    } else {
        v
    }
}

/// Integration window `[lo, hi]` for the absorbed density, or `None` when
/// the unabsorbed mass sits entirely beyond the barrier.
fn spatial_window(p: &DriftedBM1D, m: f64, t: f64) -> Option<(f64, f64)> {
    let sd = p.s * t.sqrt();
    let lo = p.mu * t - SPATIAL_SDS * sd;
    let hi = (p.mu * t + SPATIAL_SDS * sd).min(m);
    (lo < hi).then_some((lo, hi))
}

/// `E[tau_M ^ T]` alone; the inner loop of [`match_frequency`].
pub fn stopped_mean(p: &DriftedBM1D, m: f64, t: f64) -> Result<f64> {
    positive("M", m)?;
    positive("T", t)?;
    Ok(integrate(|u| survival(p, m, u), 0.0, t, Tolerance::default())?.value)
}

/// Moments of `tau_M ^ T` and of the process stopped there.
pub fn irhp_stopped_moments(p: &DriftedBM1D, m: f64, t: f64) -> Result<StoppedMoments> {
    stopped_moments_with(p, m, t, Tolerance::default())
}

pub fn stopped_moments_with(p: &DriftedBM1D, m: f64, t: f64, tol: Tolerance) -> Result<StoppedMoments> {
    positive("M", m)?;
    positive("T", t)?;
    let e_tau = integrate(|u| survival(p, m, u), 0.0, t, tol)?.value;
    let e_tau2 = integrate(|u| 2.0 * u * survival(p, m, u), 0.0, t, tol)?.value;
    let p_hit = 1.0 - survival(p, m, t);
    let (free_w, free_w2) = match spatial_window(p, m, t) {
        Some((lo, hi)) => (
            integrate(|x| x * density(p, m, t, x), lo, hi, tol)?.value,
            integrate(|x| x * x * density(p, m, t, x), lo, hi, tol)?.value,
        ),
        None => (0.0, 0.0),
    };
    Ok(StoppedMoments {
        e_tau,
        e_tau2,
        e_w: m * p_hit + free_w,
        e_w2: m * m * p_hit + free_w2,
        p_hit,
    })
}

/// Barrier `M` for which `E[tau_M ^ t_cap] = t_target`, by bisection.
pub fn match_frequency(p: &DriftedBM1D, t_target: f64, t_cap: f64) -> Result<f64> {
    positive("target frequency", t_target)?;
    positive("time cap", t_cap)?;
    if t_target >= t_cap {
        return Err(Error::Infeasible(format!(
            "E[tau ^ T] < T = {t_cap} for every barrier, cannot reach {t_target}"
        )));
    }
    let g = |m: f64| stopped_mean(p, m, t_cap).map(|e| e - t_target);
    let mut lo = 1e-8;
    let mut hi = p.mu.abs().max(1e-3) * t_cap * 1e3;
    while g(lo)? > 0.0 {
        lo *= 0.1;
        if lo < 1e-300 {
            return Err(Error::Infeasible("target below every barrier".into()));
        }
    }
    let mut expansions = 0;
    while g(hi)? < 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Infeasible("could not bracket the barrier".into()));
        }
    }
    let tol = 1e-9 * t_target;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let r = g(mid)?;
        if r.abs() <= tol || hi - lo <= f64::EPSILON * mid {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Both sides of the stopped-variance identity for `tau_q ^ T`:
/// `lhs = (s^2/mu) E[W] - Var[W]`, `rhs = mu^2 (Var[tau ^ T] + 2 E[(tau-T)+] E[(T-tau)+])`.
pub fn key_inequality_sides(p: &DriftedBM1D, q: f64, t: f64) -> Result<(f64, f64)> {
    positive("mu", p.mu)?;
    let tol = Tolerance::fine();
    let sm = stopped_moments_with(p, q, t, tol)?;
    let lhs = p.s * p.s / p.mu * sm.e_w - (sm.e_w2 - sm.e_w * sm.e_w);

    let law = HittingLaw::inverse_gaussian(q / p.mu, q * q / (p.s * p.s));
    let cdf = |u: f64| ig_cdf(&law, u).unwrap_or(0.0);
    // (T - tau)+ moments from the hitting-time CDF
    let short = integrate(cdf, 0.0, t, tol)?.value;
    let short2 = integrate(|u| 2.0 * (t - u) * cdf(u), 0.0, t, tol)?.value;
    let excess = law.mean - t + short;
    let var_stopped = short2 - short * short;
    let rhs = p.mu * p.mu * (var_stopped + 2.0 * excess * short);
    Ok((lhs, rhs))
}

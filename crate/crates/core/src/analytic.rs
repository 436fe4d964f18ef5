//! Closed-form cycle moments, average cost (AC) and average weighted delay
//! rate (AWDR) for the built-in clearing policies, and their optima.
//!
//! Notation: `D = sum D_i`, `sigma^2 = sum sigma_i^2`, `W = sum omega_i D_i`,
//! `S2 = sum omega_i^2 sigma_i^2`, `cbar = sum c_i D_i`.
//!
//! Every AC is assembled the same way, as a renewal-reward ratio
//! `(A_D + cbar E[tau] + sum omega_i E[int N_i]) / E[tau]`, so policies that
//! coincide (a `(T_Q+T)` policy with `T = 0` and a quantity policy, say)
//! produce bit-identical numbers.

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::fpt::{self, DriftedBM1D};
use crate::model::{discriminant, Policy, Sign, SystemParams};

/// First two moments and inverse Gaussian parameters of a hitting time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingLaw {
    pub mean: f64,
    pub second_moment: f64,
    pub ig_mu: f64,
    pub ig_lambda: f64,
}

impl HittingLaw {
    /// Law with inverse Gaussian location `mu` and shape `lambda`.
    pub fn inverse_gaussian(mu: f64, lambda: f64) -> Self {
        HittingLaw {
            mean: mu,
            second_moment: mu * mu + mu * mu * mu / lambda,
            ig_mu: mu,
            ig_lambda: lambda,
        }
    }

    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub ac: f64,
    pub awdr: f64,
    pub cycle_mean: f64,
    /// `E[int_0^tau N_i]` per item, when a closed form exists.
    pub per_item_waiting: Option<Vec<f64>>,
    pub provenance: Provenance,
}

/// A minimizing parameter with its minimized AC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub param: f64,
    pub ac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QtpCase {
    Qp,
    Tp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QtpOptimum {
    pub q: f64,
    pub t: f64,
    pub ac: f64,
    pub which: QtpCase,
}

/// Per-cycle expectations shared by every AC/AWDR formula.
struct Cycle {
    mean: f64,
    weighted_waiting: f64,
}

impl Cycle {
    fn from_items(params: &SystemParams, mean: f64, items: &[f64]) -> Self {
        let weighted_waiting = params.omega().iter().zip(items).map(|(w, x)| w * x).sum();
        Cycle { mean, weighted_waiting }
    }

    fn ac(&self, params: &SystemParams) -> f64 {
        (params.a_d() + params.transport_rate() * self.mean + self.weighted_waiting) / self.mean
    }

    fn awdr(&self) -> f64 {
        self.weighted_waiting / self.mean
    }
}

/// `E[int N_i]` for `tau = tau_M^ T`-free policies via the unified formula
/// `E[int_0^tau N_i] = D_i E[tau^2] / 2 + sigma_i E[tau B_i(tau)]`.
pub fn unified_item_waiting(d_i: f64, sigma_i: f64, tau_second_moment: f64, cross_moment: f64) -> f64 {
    0.5 * d_i * tau_second_moment + sigma_i * cross_moment
}

// ---------------------------------------------------------------- quantity

pub fn qp_hitting_law(params: &SystemParams, q: f64) -> Result<HittingLaw> {
    positive("Q", q)?;
    let d = params.total_drift();
    let s2 = params.total_variance();
    Ok(HittingLaw {
        mean: q / d,
        second_moment: q * q / (d * d) + s2 * q / (d * d * d),
        ig_mu: q / d,
        ig_lambda: q * q / s2,
    })
}

pub fn qp_laplace(params: &SystemParams, q: f64, s: f64) -> Result<f64> {
    positive("Q", q)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::NonPositiveParameter { name: "s", value: s });
    }
    let d = params.total_drift();
    let s2 = params.total_variance();
    Ok((root_gap(d, -2.0 * s * s2) * q / s2).exp())
}

fn check_mgf_domain(s1: f64, s2: f64) -> Result<()> {
    if !(s1.is_finite() && s2.is_finite()) || s1 * s1 + 2.0 * s2 > 0.0 {
        return Err(Error::DomainError(format!(
            "need s1^2 + 2 s2 <= 0, got s1 = {s1}, s2 = {s2}"
        )));
    }
    Ok(())
}

/// `a - sqrt(a^2 - u)` without cancellation for `a > 0`.
fn root_gap(a: f64, u: f64) -> f64 {
    let r = (a * a - u).sqrt();
    if a > 0.0 {
        u / (a + r)
    } else {
        a - r
    }
}

/// `exp((a - sqrt(a^2 - (s1^2 + 2 s2) v)) level / v)` with `a = s1 b + mu`.
fn joint_mgf(level: f64, b: f64, mu: f64, v: f64, s1: f64, s2: f64) -> f64 {
    let a = s1 * b + mu;
    (root_gap(a, (s1 * s1 + 2.0 * s2) * v) * level / v).exp()
}

/// `E[exp(s1 B_i(T_Q) + s2 T_Q)]`.
pub fn qp_joint_mgf(params: &SystemParams, q: f64, i: usize, s1: f64, s2: f64) -> Result<f64> {
    positive("Q", q)?;
    params.check_item(i)?;
    check_mgf_domain(s1, s2)?;
    Ok(joint_mgf(q, params.sigma()[i], params.total_drift(), params.total_variance(), s1, s2))
}

/// `E[B_i(T_Q) T_Q]`.
pub fn qp_cross_moment(params: &SystemParams, q: f64, i: usize) -> Result<f64> {
    positive("Q", q)?;
    params.check_item(i)?;
    let d = params.total_drift();
    Ok(-params.sigma()[i] * q / (d * d))
}

fn qp_items(params: &SystemParams, q: f64) -> Vec<f64> {
    let d = params.total_drift();
    let s2 = params.total_variance();
    (0..params.n())
        .map(|i| {
            let (di, si) = (params.d()[i], params.sigma()[i]);
            di * q * q / (2.0 * d * d) + di * s2 * q / (2.0 * d * d * d) - si * si * q / (d * d)
        })
        .collect()
}

/// `E[int_0^{T_Q} N_i(t) dt]`.
pub fn qp_item_waiting(params: &SystemParams, q: f64, i: usize) -> Result<f64> {
    positive("Q", q)?;
    params.check_item(i)?;
    Ok(qp_items(params, q)[i])
}

/// Per-item waiting for Poisson arrivals with rates `lambdas` and an integer
/// dispatch quantity.
pub fn poisson_qp_item_waiting(lambdas: &[f64], q: u64, i: usize) -> Result<f64> {
    if i >= lambdas.len() {
        return Err(Error::ItemIndex { index: i, n: lambdas.len() });
    }
    for &l in lambdas {
        positive("lambda", l)?;
    }
    if q == 0 {
        return Err(Error::NonPositiveParameter { name: "Q", value: 0.0 });
    }
    let lambda: f64 = lambdas.iter().sum();
    let q = q as f64;
    Ok(lambdas[i] * (q - 1.0) * q / (2.0 * lambda * lambda))
}

fn qp_cycle(params: &SystemParams, q: f64) -> Cycle {
    Cycle::from_items(params, q / params.total_drift(), &qp_items(params, q))
}

/// `sum omega_i (sigma_i^2 / D - D_i sigma^2 / (2 D^2))`, the constant the
/// quantity policy saves relative to the time policy at equal frequency.
pub fn qp_offset(params: &SystemParams) -> f64 {
    let d = params.total_drift();
    discriminant(params).value / (2.0 * d * d)
}

pub fn ac_qp(params: &SystemParams, q: f64) -> Result<f64> {
    positive("Q", q)?;
    Ok(qp_cycle(params, q).ac(params))
}

pub fn optimal_qp(params: &SystemParams) -> Optimum {
    let w = params.weighted_drift();
    let a = params.a_d();
    Optimum {
        param: params.total_drift() * (2.0 * a / w).sqrt(),
        ac: (2.0 * a * w).sqrt() + params.transport_rate() - qp_offset(params),
    }
}

// -------------------------------------------------------------------- time

fn tp_cycle(params: &SystemParams, t: f64) -> Cycle {
    let items: Vec<f64> = params.d().iter().map(|di| 0.5 * di * t * t).collect();
    Cycle::from_items(params, t, &items)
}

pub fn ac_tp(params: &SystemParams, t: f64) -> Result<f64> {
    positive("T", t)?;
    Ok(tp_cycle(params, t).ac(params))
}

pub fn awdr_tp(params: &SystemParams, t: f64) -> Result<f64> {
    positive("T", t)?;
    Ok(params.weighted_drift() * t / 2.0)
}

pub fn optimal_tp(params: &SystemParams) -> Optimum {
    let w = params.weighted_drift();
    let a = params.a_d();
    Optimum {
        param: (2.0 * a / w).sqrt(),
        ac: (2.0 * a * w).sqrt() + params.transport_rate(),
    }
}

// ------------------------------------------------------------ (T_Q + T)

fn check_qtp(q: f64, t: f64) -> Result<()> {
    Policy::Qtp { q, t }.validate()
}

fn qtp_items(params: &SystemParams, q: f64, t: f64) -> Vec<f64> {
    let d = params.total_drift();
    let base = if q > 0.0 { qp_items(params, q) } else { vec![0.0; params.n()] };
    base.iter()
        .zip(params.d())
        .map(|(b, di)| b + (di * q * t / d + 0.5 * di * t * t))
        .collect()
}

fn qtp_cycle(params: &SystemParams, q: f64, t: f64) -> Cycle {
    Cycle::from_items(params, q / params.total_drift() + t, &qtp_items(params, q, t))
}

/// `E[(T_Q + T)^2]`; `Q = 0` gives `T^2`.
pub fn qtp_cycle_second_moment(params: &SystemParams, q: f64, t: f64) -> Result<f64> {
    check_qtp(q, t)?;
    let (m1, m2) = if q > 0.0 {
        let law = qp_hitting_law(params, q)?;
        (law.mean, law.second_moment)
    } else {
        (0.0, 0.0)
    };
    Ok(m2 + 2.0 * t * m1 + t * t)
}

/// `E[(T_Q + T) B_i(T_Q + T)]`, equal to the quantity-policy value.
pub fn qtp_cross_moment(params: &SystemParams, q: f64, t: f64, i: usize) -> Result<f64> {
    check_qtp(q, t)?;
    params.check_item(i)?;
    if q > 0.0 {
        qp_cross_moment(params, q, i)
    } else {
        Ok(0.0)
    }
}

pub fn qtp_item_waiting(params: &SystemParams, q: f64, t: f64, i: usize) -> Result<f64> {
    check_qtp(q, t)?;
    params.check_item(i)?;
    Ok(qtp_items(params, q, t)[i])
}

/// AC of the `(T_Q + T)` policy; `T = 0` reproduces [`ac_qp`] exactly and
/// `Q = 0` is the time policy.
pub fn ac_qtp(params: &SystemParams, q: f64, t: f64) -> Result<f64> {
    check_qtp(q, t)?;
    Ok(qtp_cycle(params, q, t).ac(params))
}

/// `sum omega_i (2 sigma_i^2 / D^2 - D_i sigma^2 / D^3)`.
fn qtp_slope(params: &SystemParams) -> f64 {
    let d = params.total_drift();
    2.0 * qp_offset(params) / d
}

/// Positive root of `W Q^2 + sum omega_i (2 sigma_i^2 - D_i sigma^2 / D) Q - 2 A_D D^2`:
/// adding a time extension improves the quantity policy iff `Q < Q_bar`.
pub fn q_bar(params: &SystemParams) -> f64 {
    let d = params.total_drift();
    let w = params.weighted_drift();
    let b = qtp_slope(params) * d * d;
    let c = 2.0 * params.a_d() * d * d;
    let root = (b * b + 4.0 * w * c).sqrt();
    if b >= 0.0 {
        2.0 * c / (b + root)
    } else {
        (root - b) / (2.0 * w)
    }
}

/// Best time extension for a given `Q <= Q_bar`, clamped at zero.
pub fn t_opt_of_q(params: &SystemParams, q: f64) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::NonPositiveParameter { name: "Q", value: q });
    }
    let qb = q_bar(params);
    if q > qb {
        return Err(Error::QExceedsQbar { q, q_bar: qb });
    }
    let inner = (2.0 * params.a_d() - qtp_slope(params) * q) / params.weighted_drift();
    Ok((inner.max(0.0).sqrt() - q / params.total_drift()).max(0.0))
}

/// `AC(Q, T_opt(Q)) = sqrt((2 A_D - slope Q) W) + cbar` for `0 <= Q <= Q_bar`.
pub fn ac_qtp_along_t_opt(params: &SystemParams, q: f64) -> Result<f64> {
    t_opt_of_q(params, q)?;
    let inner = 2.0 * params.a_d() - qtp_slope(params) * q;
    Ok((inner * params.weighted_drift()).sqrt() + params.transport_rate())
}

pub fn optimal_qtp(params: &SystemParams) -> Result<QtpOptimum> {
    let disc = discriminant(params);
    match disc.sign {
        Sign::Positive => {
            let o = optimal_qp(params);
            Ok(QtpOptimum { q: o.param, t: 0.0, ac: o.ac, which: QtpCase::Qp })
        }
        Sign::Negative => {
            let o = optimal_tp(params);
            Ok(QtpOptimum { q: 0.0, t: o.param, ac: o.ac, which: QtpCase::Tp })
        }
        Sign::Zero => Err(Error::DegenerateDiscriminant(disc.value)),
    }
}

// --------------------------------------------------------- instantaneous rate

pub fn irp_hitting_law(params: &SystemParams, m: f64) -> Result<HittingLaw> {
    positive("M", m)?;
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    Ok(HittingLaw {
        mean: m / w,
        second_moment: m * m / (w * w) + s2 * m / (w * w * w),
        ig_mu: m / w,
        ig_lambda: m * m / s2,
    })
}

pub fn irp_laplace(params: &SystemParams, m: f64, s: f64) -> Result<f64> {
    positive("M", m)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::NonPositiveParameter { name: "s", value: s });
    }
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    Ok((root_gap(w, -2.0 * s * s2) * m / s2).exp())
}

/// `E[exp(s1 B_i(tau_M) + s2 tau_M)]`.
pub fn irp_joint_mgf(params: &SystemParams, m: f64, i: usize, s1: f64, s2: f64) -> Result<f64> {
    positive("M", m)?;
    params.check_item(i)?;
    check_mgf_domain(s1, s2)?;
    let b = params.omega()[i] * params.sigma()[i];
    Ok(joint_mgf(m, b, params.weighted_drift(), params.weighted_variance(), s1, s2))
}

/// `E[B_i(tau_M) tau_M]`.
pub fn irp_cross_moment(params: &SystemParams, m: f64, i: usize) -> Result<f64> {
    positive("M", m)?;
    params.check_item(i)?;
    let w = params.weighted_drift();
    Ok(-params.omega()[i] * params.sigma()[i] * m / (w * w))
}

fn irp_items(params: &SystemParams, m: f64) -> Vec<f64> {
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    (0..params.n())
        .map(|i| {
            let (di, si, wi) = (params.d()[i], params.sigma()[i], params.omega()[i]);
            0.5 * di * m * m / (w * w) + 0.5 * di * s2 * m / (w * w * w) - wi * si * si * m / (w * w)
        })
        .collect()
}

pub fn irp_item_waiting(params: &SystemParams, m: f64, i: usize) -> Result<f64> {
    positive("M", m)?;
    params.check_item(i)?;
    Ok(irp_items(params, m)[i])
}

/// `sum omega_i E[int N_i] = M^2 / (2W) - S2 M / (2 W^2)`.
pub fn irp_total_weighted_waiting(params: &SystemParams, m: f64) -> Result<f64> {
    positive("M", m)?;
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    Ok(m * m / (2.0 * w) - s2 * m / (2.0 * w * w))
}

fn irp_cycle(params: &SystemParams, m: f64) -> Cycle {
    Cycle::from_items(params, m / params.weighted_drift(), &irp_items(params, m))
}

pub fn ac_irp(params: &SystemParams, m: f64) -> Result<f64> {
    positive("M", m)?;
    Ok(irp_cycle(params, m).ac(params))
}

pub fn awdr_irp(params: &SystemParams, m: f64) -> Result<f64> {
    positive("M", m)?;
    Ok((m - params.weighted_variance() / params.weighted_drift()) / 2.0)
}

pub fn optimal_irp(params: &SystemParams) -> Optimum {
    let w = params.weighted_drift();
    let a = params.a_d();
    let root = (2.0 * a * w).sqrt();
    Optimum {
        param: root,
        ac: root + params.transport_rate() - params.weighted_variance() / (2.0 * w),
    }
}

/// `AC_QP(Q*) - AC_IRP(M*) = sum_k sigma_k^2 (omega_k D - W)^2 / (2 D^2 W)`.
pub fn qp_irp_gap(params: &SystemParams) -> f64 {
    let d = params.total_drift();
    let w = params.weighted_drift();
    let num: f64 = params
        .sigma()
        .iter()
        .zip(params.omega())
        .map(|(s, o)| s * s * (o * d - w).powi(2))
        .sum();
    num / (2.0 * d * d * w)
}

/// AWDR from the law of the weighted load `L = sum omega_i N_i(tau)` at clearing:
/// `(E[L^2] / (2W) - S2 E[L] / (2 W^2)) / E[tau]`.
pub fn awdr_generic(params: &SystemParams, load_mean: f64, load_second_moment: f64, cycle_mean: f64) -> Result<f64> {
    positive("cycle mean", cycle_mean)?;
    let mean_sq = load_mean * load_mean;
    if !load_second_moment.is_finite() || load_second_moment < mean_sq * (1.0 - 1e-12) {
        return Err(Error::InconsistentMoments { second: load_second_moment, mean_sq });
    }
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    Ok((load_second_moment / (2.0 * w) - s2 * load_mean / (2.0 * w * w)) / cycle_mean)
}

// ------------------------------------------------------------------ dispatch

/// AC/AWDR of a built-in policy: closed forms, or quadrature for the hybrid
/// rate policy. Custom rules have no closed form.
pub fn evaluate(params: &SystemParams, policy: &Policy) -> Result<PolicyReport> {
    policy.validate()?;
    let (cycle, items, provenance) = match *policy {
        Policy::Qp { q } => (qp_cycle(params, q), Some(qp_items(params, q)), Provenance::Analytic),
        Policy::Tp { t } => {
            let c = tp_cycle(params, t);
            let items = params.d().iter().map(|di| 0.5 * di * t * t).collect();
            (c, Some(items), Provenance::Analytic)
        }
        Policy::Qtp { q, t } => (qtp_cycle(params, q, t), Some(qtp_items(params, q, t)), Provenance::Analytic),
        Policy::Irp { m } => (irp_cycle(params, m), Some(irp_items(params, m)), Provenance::Analytic),
        Policy::Irhp { m, t } => (irhp_cycle(params, m, t)?, None, Provenance::Quadrature),
        Policy::Custom(ref rule) => {
            return Err(Error::DomainError(format!(
                "custom rule '{}' has no closed form; simulate it instead",
                rule.name
            )))
        }
    };
    Ok(PolicyReport {
        policy: policy.to_string(),
        ac: cycle.ac(params),
        awdr: cycle.awdr(),
        cycle_mean: cycle.mean,
        per_item_waiting: items,
        provenance,
    })
}

fn irhp_cycle(params: &SystemParams, m: f64, t: f64) -> Result<Cycle> {
    let sm = fpt::irhp_stopped_moments(&DriftedBM1D::weighted(params), m, t)?;
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    Ok(Cycle {
        mean: sm.e_tau,
        weighted_waiting: sm.e_w2 / (2.0 * w) - s2 * sm.e_w / (2.0 * w * w),
    })
}

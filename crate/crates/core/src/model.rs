//! System parameters, derived aggregates and the clearing-policy taxonomy.
//!
//! Item `i` accumulates as `N_i(t) = D_i t + sigma_i B_i(t)` with independent
//! standard Brownian motions `B_i`. Everything downstream works from a
//! validated [`SystemParams`], whose aggregates are computed once here.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Default hard cap on the length of a cycle driven by a [`CustomRule`].
pub const DEFAULT_TIME_CAP: f64 = 1e6;

/// Raw parameter document as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub d: Vec<f64>,
    pub sigma: Vec<f64>,
    pub c: Vec<f64>,
    pub omega: Vec<f64>,
    pub a_d: f64,
}

/// Validated n-item model with its aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    d: Vec<f64>,
    sigma: Vec<f64>,
    c: Vec<f64>,
    omega: Vec<f64>,
    a_d: f64,
    total_drift: f64,
    total_variance: f64,
    weighted_drift: f64,
    weighted_variance: f64,
    transport_rate: f64,
}

impl TryFrom<RawParams> for SystemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        validate(raw)
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        RawParams {
            d: p.d,
            sigma: p.sigma,
            c: p.c,
            omega: p.omega,
            a_d: p.a_d,
        }
    }
}

/// Checks every model assumption and populates the aggregates
/// `D = sum D_i`, `sigma^2 = sum sigma_i^2`, `sum omega_i D_i`,
/// `sum omega_i^2 sigma_i^2` and `sum c_i D_i`.
pub fn validate(raw: RawParams) -> Result<SystemParams> {
    let n = raw.d.len();
    if n == 0 {
        return Err(Error::EmptySystem);
    }
    for (field, len) in [
        ("sigma", raw.sigma.len()),
        ("c", raw.c.len()),
        ("omega", raw.omega.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                field,
                got: len,
                expected: n,
            });
        }
    }
    for i in 0..n {
        let (d, s, w, c) = (raw.d[i], raw.sigma[i], raw.omega[i], raw.c[i]);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NonPositiveDrift { index: i, value: d });
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveDiffusion { index: i, value: s });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonPositiveWeight { index: i, value: w });
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::NegativeCost { index: i, value: c });
        }
    }
    if !(raw.a_d > 0.0 && raw.a_d.is_finite()) {
        return Err(Error::NonPositiveFixedCost(raw.a_d));
    }

    let total_drift = raw.d.iter().sum();
    let total_variance = raw.sigma.iter().map(|s| s * s).sum();
    let weighted_drift = raw.omega.iter().zip(&raw.d).map(|(w, d)| w * d).sum();
    let weighted_variance = raw
        .omega
        .iter()
        .zip(&raw.sigma)
        .map(|(w, s)| w * w * s * s)
        .sum();
    let transport_rate = raw.c.iter().zip(&raw.d).map(|(c, d)| c * d).sum();

    Ok(SystemParams {
        d: raw.d,
        sigma: raw.sigma,
        c: raw.c,
        omega: raw.omega,
        a_d: raw.a_d,
        total_drift,
        total_variance,
        weighted_drift,
        weighted_variance,
        transport_rate,
    })
}

impl SystemParams {
    pub fn new(d: Vec<f64>, sigma: Vec<f64>, c: Vec<f64>, omega: Vec<f64>, a_d: f64) -> Result<Self> {
        validate(RawParams {
            d,
            sigma,
            c,
            omega,
            a_d,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawParams = serde_json::from_str(text)?;
        validate(raw)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }
    pub fn d(&self) -> &[f64] {
        &self.d
    }
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }
    pub fn a_d(&self) -> f64 {
        self.a_d
    }
    /// `D = sum D_i`.
    pub fn total_drift(&self) -> f64 {
        self.total_drift
    }
    /// `sigma^2 = sum sigma_i^2`.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }
    /// `sum omega_i D_i`, the drift of the weighted load.
    pub fn weighted_drift(&self) -> f64 {
        self.weighted_drift
    }
    /// `sum omega_i^2 sigma_i^2`, the squared diffusion of the weighted load.
    pub fn weighted_variance(&self) -> f64 {
        self.weighted_variance
    }
    /// `sum c_i D_i`.
    pub fn transport_rate(&self) -> f64 {
        self.transport_rate
    }

    pub(crate) fn check_item(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::ItemIndex { index: i, n: self.n() })
        }
    }

    /// Returns a copy with a different fixed clearing cost.
    pub fn with_fixed_cost(&self, a_d: f64) -> Result<Self> {
        Self::new(
            self.d.clone(),
            self.sigma.clone(),
            self.c.clone(),
            self.omega.clone(),
            a_d,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

/// `sum omega_i (2 D sigma_i^2 - D_i sigma^2)`; positive favours the
/// quantity policy over the time policy at their optima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub value: f64,
    pub sign: Sign,
}

/// Relative width of the band classified as [`Sign::Zero`].
pub const DISCRIMINANT_TOL: f64 = 1e-12;

pub fn discriminant(params: &SystemParams) -> Discriminant {
    let d = params.total_drift();
    let s2 = params.total_variance();
    let mut value = 0.0;
    let mut scale = 0.0;
    for i in 0..params.n() {
        let w = params.omega[i];
        let a = 2.0 * d * params.sigma[i] * params.sigma[i];
        let b = params.d[i] * s2;
        value += w * (a - b);
        scale += w * (a + b);
    }
    let sign = if value.abs() <= DISCRIMINANT_TOL * scale.max(1.0) {
        Sign::Zero
    } else if value > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    };
    Discriminant { value, sign }
}

/// A renewal-type stopping rule evaluated on `(elapsed time, N vector)`.
///
/// The rule may only look at the current cycle, so cycles stay i.i.d.
#[derive(Clone)]
pub struct CustomRule {
    pub name: String,
    rule: Arc<dyn Fn(f64, &[f64]) -> bool + Send + Sync>,
    pub time_cap: f64,
}

impl CustomRule {
    pub fn new(name: impl Into<String>, rule: impl Fn(f64, &[f64]) -> bool + Send + Sync + 'static) -> Self {
        CustomRule {
            name: name.into(),
            rule: Arc::new(rule),
            time_cap: DEFAULT_TIME_CAP,
        }
    }

    pub fn with_time_cap(mut self, cap: f64) -> Self {
        self.time_cap = cap;
        self
    }

    pub fn should_clear(&self, t: f64, n: &[f64]) -> bool {
        (self.rule)(t, n)
    }
}

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRule")
            .field("name", &self.name)
            .field("time_cap", &self.time_cap)
            .finish_non_exhaustive()
    }
}

/// Clearing policies. `Qtp` is the `(T_Q + T)` policy; `Irhp` clears at
/// `min(tau_M, T)`.
#[derive(Debug, Clone)]
pub enum Policy {
    Qp { q: f64 },
    Tp { t: f64 },
    Qtp { q: f64, t: f64 },
    Irp { m: f64 },
    Irhp { m: f64, t: f64 },
    Custom(CustomRule),
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Policy::Qp { q } => positive("Q", q).map(drop),
            Policy::Tp { t } => positive("T", t).map(drop),
            Policy::Qtp { q, t } => {
                if !(q >= 0.0 && q.is_finite()) {
                    return Err(Error::NonPositiveParameter { name: "Q", value: q });
                }
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::NonPositiveParameter { name: "T", value: t });
                }
                if q == 0.0 && t == 0.0 {
                    return Err(Error::ZeroCycle);
                }
                Ok(())
            }
            Policy::Irp { m } => positive("M", m).map(drop),
            Policy::Irhp { m, t } => {
                positive("M", m)?;
                positive("T", t).map(drop)
            }
            Policy::Custom(ref rule) => positive("time cap", rule.time_cap).map(drop),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Policy::Qp { .. } => "qp",
            Policy::Tp { .. } => "tp",
            Policy::Qtp { .. } => "qtp",
            Policy::Irp { .. } => "irp",
            Policy::Irhp { .. } => "irhp",
            Policy::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Qp { q } => write!(f, "QP(Q={q})"),
            Policy::Tp { t } => write!(f, "TP(T={t})"),
            Policy::Qtp { q, t } => write!(f, "QTP(Q={q}, T={t})"),
            Policy::Irp { m } => write!(f, "IRP(M={m})"),
            Policy::Irhp { m, t } => write!(f, "IRHP(M={m}, T={t})"),
            Policy::Custom(rule) => write!(f, "Custom({})", rule.name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> SystemParams {
        SystemParams::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 2.0], 3.0).unwrap()
    }

    #[test]
    fn aggregates_are_direct_sums() {
        let p = p1();
        assert_eq!(p.total_drift(), 2.0);
        assert_eq!(p.total_variance(), 2.0);
        assert_eq!(p.weighted_drift(), 3.0);
        assert_eq!(p.weighted_variance(), 5.0);
        assert_eq!(p.transport_rate(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = SystemParams::new(vec![1.0, -1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 2.0], 3.0);
        assert!(matches!(bad, Err(Error::NonPositiveDrift { index: 1, .. })));
        let bad = SystemParams::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 1.0], 3.0);
        assert!(matches!(bad, Err(Error::NonPositiveWeight { index: 0, .. })));
        let bad = SystemParams::new(vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], 3.0);
        assert!(matches!(bad, Err(Error::NonPositiveDiffusion { index: 1, .. })));
        let bad = SystemParams::new(vec![1.0], vec![1.0], vec![-0.5], vec![1.0], 3.0);
        assert!(matches!(bad, Err(Error::NegativeCost { .. })));
        let bad = SystemParams::new(vec![1.0], vec![1.0], vec![0.0], vec![1.0], 0.0);
        assert!(matches!(bad, Err(Error::NonPositiveFixedCost(_))));
        let bad = SystemParams::new(vec![1.0, 2.0], vec![1.0], vec![0.0, 0.0], vec![1.0, 1.0], 1.0);
        assert!(matches!(bad, Err(Error::LengthMismatch { field: "sigma", .. })));
        let bad = SystemParams::new(vec![], vec![], vec![], vec![], 1.0);
        assert!(matches!(bad, Err(Error::EmptySystem)));
    }

    #[test]
    fn discriminant_examples() {
        let d = discriminant(&p1());
        assert!((d.value - 6.0).abs() < 1e-12);
        assert_eq!(d.sign, Sign::Positive);

        let p2 = SystemParams::new(vec![1.0, 1.0], vec![1.0, 3.0], vec![0.0, 0.0], vec![5.0, 1.0], 3.0).unwrap();
        let d = discriminant(&p2);
        assert!((d.value + 4.0).abs() < 1e-12);
        assert_eq!(d.sign, Sign::Negative);
    }

    #[test]
    fn single_item_discriminant_is_positive() {
        let p = SystemParams::new(vec![2.5], vec![0.7], vec![1.0], vec![3.0], 1.0).unwrap();
        let d = discriminant(&p);
        let expected = 3.0 * 2.5 * 0.7 * 0.7;
        assert!((d.value - expected).abs() < 1e-12 * expected);
        assert_eq!(d.sign, Sign::Positive);
    }

    #[test]
    fn exact_zero_is_reported_as_zero() {
        // D = (1, 1), sigma^2 = (1, 5), omega = (7, 1): 7 (4 - 6) + (20 - 6) = 0
        let p = SystemParams::new(vec![1.0, 1.0], vec![1.0, 5f64.sqrt()], vec![0.0, 0.0], vec![7.0, 1.0], 1.0).unwrap();
        let d = discriminant(&p);
        assert_eq!(d.sign, Sign::Zero, "value {}", d.value);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let text = r#"{"d":[1,1],"sigma":[1,1],"c":[0,0],"omega":[1,2],"a_d":3}"#;
        let p = SystemParams::from_json_str(text).unwrap();
        assert_eq!(p, p1());
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(SystemParams::from_json_str(&back).unwrap(), p);

        let err = SystemParams::from_json_str("{\"d\": [1,\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = SystemParams::from_json_str(r#"{"d":[1],"sigma":[1],"c":[0],"omega":[1],"a_d":-1}"#).unwrap_err();
        assert!(matches!(err, Error::Parse(_) | Error::NonPositiveFixedCost(_)), "{err}");
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::Qtp { q: 1.0, t: 0.0 }.validate().is_ok());
        assert!(Policy::Qtp { q: 0.0, t: 1.0 }.validate().is_ok());
        assert!(matches!(Policy::Qtp { q: 0.0, t: 0.0 }.validate(), Err(Error::ZeroCycle)));
        assert!(Policy::Qp { q: 0.0 }.validate().is_err());
        assert!(Policy::Irhp { m: 1.0, t: -1.0 }.validate().is_err());
        let rule = CustomRule::new("never", |_, _| false).with_time_cap(0.0);
        assert!(Policy::Custom(rule).validate().is_err());
    }
}

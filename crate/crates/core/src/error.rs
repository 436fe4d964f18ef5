use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("system must contain at least one item type")]
    EmptySystem,
    #[error("parameter vectors differ in length: {field} has {got}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("drift d[{index}] = {value} must be positive")]
    NonPositiveDrift { index: usize, value: f64 },
    #[error("diffusion sigma[{index}] = {value} must be positive")]
    NonPositiveDiffusion { index: usize, value: f64 },
    #[error("waiting weight omega[{index}] = {value} must be positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("transport cost c[{index}] = {value} must be non-negative")]
    NegativeCost { index: usize, value: f64 },
    #[error("fixed clearing cost a_d = {0} must be positive")]
    NonPositiveFixedCost(f64),
    #[error("{name} = {value} must be positive and finite")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("item index {index} out of range for {n} item types")]
    ItemIndex { index: usize, n: usize },
    #[error("(T_Q+T) policy with Q = 0 and T = 0 has a zero-length cycle")]
    ZeroCycle,
    #[error("transform argument outside its domain: {0}")]
    DomainError(String),
    #[error("Q = {q} exceeds the improvement threshold Q-bar = {q_bar}")]
    QExceedsQbar { q: f64, q_bar: f64 },
    #[error("discriminant {0} is numerically zero; no optimality claim applies")]
    DegenerateDiscriminant(f64),
    #[error("inconsistent load moments: second moment {second} < squared mean {mean_sq}")]
    InconsistentMoments { second: f64, mean_sq: f64 },
    #[error("adaptive quadrature did not converge: estimate {estimate}, error {error}")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("infeasible frequency match: {0}")]
    Infeasible(String),
    #[error("custom clearing rule did not fire before the time cap {cap}")]
    CycleCapExceeded { cap: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("parameter file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositiveParameter { name, value })
    }
}

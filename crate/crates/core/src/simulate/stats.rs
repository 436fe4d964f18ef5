//! Streaming mean/covariance accumulation and delta-method estimates.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Point estimate with standard error and a 95% normal interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
}

impl Estimate {
    pub fn new(mean: f64, std_err: f64, n_samples: u64) -> Self {
        Estimate {
            mean,
            std_err,
            ci_low: mean - Z95 * std_err,
            ci_high: mean + Z95 * std_err,
            n_samples,
        }
    }

    /// `(mean - target) / std_err`; infinite when the error is zero and the
    /// values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.std_err > 0.0 {
            d / self.std_err
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    /// `|mean - target| <= k * std_err`, with a small absolute floor for
    /// statistics that are constant up to round-off.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let floor = 1e-9 * target.abs().max(1.0);
        (self.mean - target).abs() <= k * self.std_err + floor
    }
}

/// Running mean vector and co-moment matrix of fixed-length feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Moments {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64], scratch: &mut Vec<f64>) {
        let dim = self.dim();
        debug_assert_eq!(x.len(), dim);
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        scratch.clear();
        scratch.extend(x.iter().zip(&self.mean).map(|(xi, mi)| xi - mi));
        for (m, d) in self.mean.iter_mut().zip(scratch.iter()) {
            *m += d * inv;
        }
        for a in 0..dim {
            let da = scratch[a];
            let row = &mut self.comoment[a * dim..(a + 1) * dim];
            for b in 0..dim {
                row[b] += da * (x[b] - self.mean[b]);
            }
        }
    }

    /// Pairwise combination; merging in a fixed order is deterministic.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let dim = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for a in 0..dim {
            self.mean[a] += delta[a] * nb / n;
        }
        let f = na * nb / n;
        for a in 0..dim {
            for b in 0..dim {
                self.comoment[a * dim + b] += other.comoment[a * dim + b] + delta[a] * delta[b] * f;
            }
        }
        self.count += other.count;
    }

    /// Sample covariance (divisor `n - 1`).
    pub fn cov(&self, a: usize, b: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.comoment[a * self.dim() + b] / (self.count - 1) as f64
    }

    fn quad_form(&self, g: &[f64]) -> f64 {
        let dim = self.dim();
        let mut s = 0.0;
        for a in 0..dim {
            if g[a] == 0.0 {
                continue;
            }
            for b in 0..dim {
                s += g[a] * g[b] * self.cov(a, b);
            }
        }
        s.max(0.0)
    }

    /// Mean of `c + a . x`.
    pub fn linear(&self, a: &[f64], c: f64) -> Estimate {
        let mean = c + dot(a, &self.mean);
        let se = (self.quad_form(a) / self.count as f64).sqrt();
        Estimate::new(mean, se, self.count)
    }

    /// `value = f(mean)` with first-order error from the gradient of `f`.
    pub fn delta(&self, value: f64, grad: &[f64]) -> Estimate {
        let se = (self.quad_form(grad) / self.count as f64).sqrt();
        Estimate::new(value, se, self.count)
    }

    /// Ratio `(c + a . mean) / (b . mean)` with a delta-method error.
    pub fn ratio(&self, a: &[f64], c: f64, b: &[f64]) -> Estimate {
        let num = c + dot(a, &self.mean);
        let den = dot(b, &self.mean);
        let r = num / den;
        let g: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| (ai - r * bi) / den).collect();
        let se = (self.quad_form(&g) / self.count as f64).sqrt();
        Estimate::new(r, se, self.count)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

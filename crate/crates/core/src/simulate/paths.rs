//! Cycle samplers. Every sampler works with the standard motions `B_i` and
//! returns `(tau, B(tau), int_0^tau B)`; the drift part is added exactly by
//! the caller.
//!
//! Quantity and rate policies draw `tau` exactly from its inverse Gaussian
//! law. Given `tau`, the scalar motion driving the threshold, read backwards
//! from the hit, is a 3-d Bessel bridge, and the component orthogonal to it
//! is an independent Brownian motion whose value and time integral are
//! jointly Gaussian. Only the Bessel bridge integral is discretized.
//!
//! Hybrid and custom rules step on a grid. Grid paths are built block by
//! block with the dyadic midpoint (Levy) construction, so halving the step
//! refines the same path instead of drawing a new one.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::stream::{aux_rng, cycle_rng, seek_block};
use crate::error::{Error, Result};
use crate::fpt::sample_ig;
use crate::model::{CustomRule, Policy, SystemParams};

const INV_SQRT_12: f64 = 0.288_675_134_594_812_9;
const MAX_LEVELS: u32 = 30;

/// Standardized end state of one cycle.
pub(crate) struct RawCycle {
    pub tau: f64,
    pub b: Vec<f64>,
    pub int_b: Vec<f64>,
}

/// Threshold crossing of `mu t + s (u . B(t))` at `level`.
#[derive(Debug, Clone)]
pub(crate) struct HitSpec {
    level: f64,
    mu: f64,
    s: f64,
    u: Vec<f64>,
    dt: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct GridSpec {
    block_len: f64,
    levels: u32,
    blocks: u64,
    /// Deterministic end of the cycle (the hybrid cap).
    t_end: Option<f64>,
    barrier: Option<f64>,
    rule: Option<CustomRule>,
    cap: f64,
    correction: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum Plan {
    Hit(HitSpec),
    Tp(f64),
    Qtp(Option<HitSpec>, f64),
    Grid(GridSpec),
}

fn levels_for(block_len: f64, dt: f64) -> u32 {
    let r = (block_len / dt).log2().ceil();
    if r <= 0.0 {
        0
    } else {
        (r as u32).min(MAX_LEVELS)
    }
}

impl Plan {
    pub(crate) fn new(params: &SystemParams, policy: &Policy, dt: Option<f64>, correction: bool) -> Result<Plan> {
        policy.validate()?;
        let d = params.total_drift();
        let w = params.weighted_drift();
        let s2w = params.weighted_variance();
        let qp_spec = |q: f64| {
            let s = params.total_variance().sqrt();
            HitSpec {
                level: q,
                mu: d,
                s,
                u: params.sigma().iter().map(|x| x / s).collect(),
                dt: dt.unwrap_or(1e-3 * q / d),
            }
        };
        Ok(match policy {
            Policy::Qp { q } => Plan::Hit(qp_spec(*q)),
            Policy::Tp { t } => Plan::Tp(*t),
            Policy::Qtp { q, t } => Plan::Qtp((*q > 0.0).then(|| qp_spec(*q)), *t),
            Policy::Irp { m } => {
                let s = s2w.sqrt();
                Plan::Hit(HitSpec {
                    level: *m,
                    mu: w,
                    s,
                    u: params.omega().iter().zip(params.sigma()).map(|(o, x)| o * x / s).collect(),
                    dt: dt.unwrap_or(1e-3 * m / w),
                })
            }
            Policy::Irhp { m, t } => {
                let blocks = (t / (m / w)).ceil().max(1.0);
                let block_len = t / blocks;
                let dt = dt.unwrap_or(1e-3 * t.min(m / w));
                Plan::Grid(GridSpec {
                    block_len,
                    levels: levels_for(block_len, dt),
                    blocks: blocks as u64,
                    t_end: Some(*t),
                    barrier: Some(*m),
                    rule: None,
                    cap: *t,
                    correction,
                })
            }
            Policy::Custom(rule) => {
                let block_len = rule.time_cap.min(1.0);
                let dt = dt.unwrap_or(1e-3);
                Plan::Grid(GridSpec {
                    block_len,
                    levels: levels_for(block_len, dt),
                    blocks: (rule.time_cap / block_len).ceil() as u64,
                    t_end: None,
                    barrier: None,
                    rule: Some(rule.clone()),
                    cap: rule.time_cap,
                    correction: false,
                })
            }
        })
    }

    /// Grid step actually used by gridded plans.
    pub(crate) fn grid_step(&self) -> Option<f64> {
        match self {
            Plan::Grid(g) => Some(g.block_len / (1u64 << g.levels) as f64),
            _ => None,
        }
    }

    pub(crate) fn sample(&self, params: &SystemParams, seed: u64, cycle: u64, buf: &mut Vec<f64>) -> Result<RawCycle> {
        let mut rng = cycle_rng(seed, cycle);
        match self {
            Plan::Hit(h) => Ok(hit_cycle(h, &mut rng)),
            Plan::Tp(t) => {
                let mut c = RawCycle {
                    tau: 0.0,
                    b: vec![0.0; params.n()],
                    int_b: vec![0.0; params.n()],
                };
                extend(&mut c, *t, &mut rng);
                Ok(c)
            }
            Plan::Qtp(h, t) => {
                let mut c = match h {
                    Some(h) => hit_cycle(h, &mut rng),
                    None => RawCycle {
                        tau: 0.0,
                        b: vec![0.0; params.n()],
                        int_b: vec![0.0; params.n()],
                    },
                };
                if *t > 0.0 {
                    extend(&mut c, *t, &mut rng);
                }
                Ok(c)
            }
            Plan::Grid(g) => grid_cycle(params, g, seed, cycle, &mut rng, buf),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Value and time integral of a standard Brownian motion over `[0, t]`.
fn gaussian_pair(t: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let x1 = normal(rng);
    let x2 = normal(rng);
    (t.sqrt() * x1, t * t.sqrt() * (0.5 * x1 + INV_SQRT_12 * x2))
}

/// Runs every component forward for a deterministic time `t`.
fn extend(c: &mut RawCycle, t: f64, rng: &mut ChaCha8Rng) {
    for i in 0..c.b.len() {
        let (g, h) = gaussian_pair(t, rng);
        c.int_b[i] += t * c.b[i] + h;
        c.b[i] += g;
    }
    c.tau += t;
}

/// Trapezoid integral of the norm of a 3-d Brownian bridge from the origin to
/// `(a, 0, 0)` over `[0, tau]` with `m` steps.
fn bessel_bridge_integral(a: f64, tau: f64, m: usize, rng: &mut ChaCha8Rng) -> f64 {
    let h = tau / m as f64;
    let mut y = [0.0f64; 3];
    let mut r_prev = 0.0;
    let mut acc = 0.0;
    for k in 1..m {
        let rem = (m - k + 1) as f64;
        let sd = (h * (rem - 1.0) / rem).sqrt();
        y[0] += (a - y[0]) / rem + sd * normal(rng);
        y[1] += -y[1] / rem + sd * normal(rng);
        y[2] += -y[2] / rem + sd * normal(rng);
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        acc += r_prev + r;
        r_prev = r;
    }
    acc += r_prev + a;
    0.5 * h * acc
}

fn hit_cycle(spec: &HitSpec, rng: &mut ChaCha8Rng) -> RawCycle {
    let tau = sample_ig(spec.level / spec.mu, (spec.level / spec.s).powi(2), rng);
    let n = spec.u.len();
    let mut b = Vec::with_capacity(n);
    let mut int_b = Vec::with_capacity(n);
    for _ in 0..n {
        let (g, h) = gaussian_pair(tau, rng);
        b.push(g);
        int_b.push(h);
    }
    let ug: f64 = spec.u.iter().zip(&b).map(|(u, x)| u * x).sum();
    let uh: f64 = spec.u.iter().zip(&int_b).map(|(u, x)| u * x).sum();

    let a = spec.level / spec.s;
    let steps = (tau / spec.dt).ceil().max(1.0) as usize;
    let int_r = bessel_bridge_integral(a, tau, steps, rng);
    let along_end = a - spec.mu * tau / spec.s;
    let along_int = a * tau - int_r - spec.mu * tau * tau / (2.0 * spec.s);
    for i in 0..n {
        let u = spec.u[i];
        b[i] += u * (along_end - ug);
        int_b[i] += u * (along_int - uh);
    }
    RawCycle { tau, b, int_b }
}

/// Fills `buf[j * n + i]`, `j = 0..=2^levels`, with `B_i` relative to the
/// block start.
fn fill_block(buf: &mut [f64], n: usize, levels: u32, block_len: f64, rng: &mut ChaCha8Rng) {
    let pts = 1usize << levels;
    buf[..n].fill(0.0);
    let sd0 = block_len.sqrt();
    for i in 0..n {
        buf[pts * n + i] = sd0 * normal(rng);
    }
    let mut step = pts;
    let mut len = block_len;
    while step > 1 {
        let half = step / 2;
        let sd = (0.25 * len).sqrt();
        let mut j = half;
        while j < pts {
            for i in 0..n {
                let mid = 0.5 * (buf[(j - half) * n + i] + buf[(j + half) * n + i]);
                buf[j * n + i] = mid + sd * normal(rng);
            }
            j += step;
        }
        step = half;
        len *= 0.5;
    }
}

fn grid_cycle(
    params: &SystemParams,
    g: &GridSpec,
    seed: u64,
    cycle: u64,
    rng: &mut ChaCha8Rng,
    buf: &mut Vec<f64>,
) -> Result<RawCycle> {
    let n = params.n();
    let pts = 1usize << g.levels;
    let h = g.block_len / pts as f64;
    buf.resize((pts + 1) * n, 0.0);
    let mut aux = aux_rng(seed, cycle);
    let w = params.weighted_drift();
    let s2 = params.weighted_variance();
    let load_dir: Vec<f64> = params.omega().iter().zip(params.sigma()).map(|(o, s)| o * s).collect();
    let load = |t: f64, b: &[f64]| w * t + load_dir.iter().zip(b).map(|(a, x)| a * x).sum::<f64>();

    let mut start = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let mut level = vec![0.0; n];
    let mut int_b = vec![0.0; n];
    let (mut t_prev, mut v_prev) = (0.0, 0.0);

    for block in 0..g.blocks {
        seek_block(rng, block);
        fill_block(buf, n, g.levels, g.block_len, rng);
        let last_block = block + 1 == g.blocks;
        for j in 1..=pts {
            let t = match g.t_end {
                Some(end) if last_block && j == pts => end,
                _ => block as f64 * g.block_len + j as f64 * h,
            };
            for i in 0..n {
                cur[i] = start[i] + buf[j * n + i];
            }
            let dt = t - t_prev;

            if let Some(m) = g.barrier {
                let v = load(t, &cur);
                let theta = if v >= m {
                    Some(if g.correction { (m - v_prev) / (v - v_prev) } else { 1.0 })
                } else if g.correction {
                    let p = (-2.0 * (m - v_prev) * (m - v) / (s2 * dt)).exp();
                    (aux.random::<f64>() < p).then(|| aux.random::<f64>())
                } else {
                    None
                };
                if let Some(th) = theta {
                    let step = th * dt;
                    let tau = t_prev + step;
                    let mut b: Vec<f64> = (0..n).map(|i| prev[i] + th * (cur[i] - prev[i])).collect();
                    if g.correction {
                        let gap = (m - load(tau, &b)) / s2;
                        for i in 0..n {
                            b[i] += gap * load_dir[i];
                        }
                    }
                    for i in 0..n {
                        int_b[i] += 0.5 * (prev[i] + b[i]) * step;
                    }
                    return Ok(RawCycle { tau, b, int_b });
                }
                v_prev = v;
            }

            for i in 0..n {
                int_b[i] += 0.5 * (prev[i] + cur[i]) * dt;
            }
            if g.t_end.is_some_and(|end| t >= end) {
                return Ok(RawCycle { tau: t, b: cur, int_b });
            }
            if let Some(rule) = &g.rule {
                for i in 0..n {
                    level[i] = params.d()[i] * t + params.sigma()[i] * cur[i];
                }
                if rule.should_clear(t, &level) {
                    return Ok(RawCycle { tau: t, b: cur, int_b });
                }
                if t >= g.cap {
                    return Err(Error::CycleCapExceeded { cap: g.cap });
                }
            }
            prev.copy_from_slice(&cur);
            t_prev = t;
        }
        start.copy_from_slice(&cur);
    }
    Err(Error::CycleCapExceeded { cap: g.cap })
}

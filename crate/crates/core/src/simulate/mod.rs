//! Renewal-reward Monte Carlo over i.i.d. clearing cycles.
//!
//! Cycles are simulated in fixed-size chunks. Each chunk reduces its cycles
//! to a [`Moments`] accumulator and chunks are merged in index order, so the
//! result for a given seed is bit-identical for any number of workers.

mod paths;
mod stats;
pub(crate) mod stream;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{PolicyReport, Provenance};
use crate::error::{Error, Result};
use crate::model::{Policy, SystemParams};
use paths::{Plan, RawCycle};

pub use stats::{Estimate, Moments, Z95};

/// Cycles per accumulation chunk.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_cycles: u64,
    /// Grid step; `None` selects a policy-dependent default.
    pub dt: Option<f64>,
    pub seed: u64,
    pub bridge_correction: bool,
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_cycles: 100_000,
            dt: None,
            seed: 0x5EED,
            bridge_correction: true,
            workers: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::InvalidConfig("n_cycles must be at least 1".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
            }
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Statistics of one simulated cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    pub tau: f64,
    pub n_at_tau: Vec<f64>,
    pub int_n: Vec<f64>,
    /// `tau * B_i(tau)`.
    pub tau_b: Vec<f64>,
    pub weighted_load: f64,
}

impl CycleSample {
    fn from_raw(params: &SystemParams, raw: RawCycle) -> Self {
        let tau = raw.tau;
        let n_at_tau: Vec<f64> = (0..params.n())
            .map(|i| params.d()[i] * tau + params.sigma()[i] * raw.b[i])
            .collect();
        let int_n = (0..params.n())
            .map(|i| 0.5 * params.d()[i] * tau * tau + params.sigma()[i] * raw.int_b[i])
            .collect();
        let tau_b = raw.b.iter().map(|b| tau * b).collect();
        let weighted_load = params.omega().iter().zip(&n_at_tau).map(|(w, x)| w * x).sum();
        CycleSample {
            tau,
            n_at_tau,
            int_n,
            tau_b,
            weighted_load,
        }
    }

    /// Feature row `[tau, tau^2, N.., int N.., tau B.., L, L^2]`.
    fn features(&self, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.tau);
        out.push(self.tau * self.tau);
        out.extend_from_slice(&self.n_at_tau);
        out.extend_from_slice(&self.int_n);
        out.extend_from_slice(&self.tau_b);
        out.push(self.weighted_load);
        out.push(self.weighted_load * self.weighted_load);
    }
}

/// Column layout of the feature rows.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
}

impl Layout {
    const TAU: usize = 0;
    const TAU2: usize = 1;
    fn n_at(&self, i: usize) -> usize {
        2 + i
    }
    fn int_n(&self, i: usize) -> usize {
        2 + self.n + i
    }
    fn tau_b(&self, i: usize) -> usize {
        2 + 2 * self.n + i
    }
    fn load(&self) -> usize {
        2 + 3 * self.n
    }
    fn load2(&self) -> usize {
        3 + 3 * self.n
    }
    fn dim(&self) -> usize {
        4 + 3 * self.n
    }
    fn unit(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[k] = 1.0;
        v
    }
}

/// Per-cycle statistic selectable by [`estimate_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    Tau,
    Tau2,
    TauB(usize),
    NAt(usize),
    IntN(usize),
    Load,
    Load2,
}

/// Draws one cycle from substream `(cfg.seed, cycle)`.
pub fn simulate_cycle(params: &SystemParams, policy: &Policy, cfg: &SimConfig, cycle: u64) -> Result<CycleSample> {
    let plan = Plan::new(params, policy, cfg.dt, cfg.bridge_correction)?;
    let mut buf = Vec::new();
    Ok(CycleSample::from_raw(params, plan.sample(params, cfg.seed, cycle, &mut buf)?))
}

/// Accumulated cycle statistics of one run.
#[derive(Debug, Clone)]
pub struct SimRun {
    params: SystemParams,
    policy: String,
    layout: Layout,
    moments: Moments,
    grid_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub n_cycles: u64,
    pub ac: Estimate,
    pub awdr: Estimate,
    pub cycle_mean: Estimate,
    pub per_item_waiting: Vec<Estimate>,
    /// Grid step used by gridded policies.
    pub grid_step: Option<f64>,
}

impl SimReport {
    pub fn to_policy_report(&self) -> PolicyReport {
        PolicyReport {
            policy: self.policy.clone(),
            ac: self.ac.mean,
            awdr: self.awdr.mean,
            cycle_mean: self.cycle_mean.mean,
            per_item_waiting: Some(self.per_item_waiting.iter().map(|e| e.mean).collect()),
            provenance: Provenance::MonteCarlo,
        }
    }
}

fn simulate_chunk(
    params: &SystemParams,
    plan: &Plan,
    seed: u64,
    range: std::ops::Range<u64>,
    dim: usize,
    mut keep: Option<&mut Vec<CycleSample>>,
) -> Result<Moments> {
    let mut m = Moments::new(dim);
    let mut buf = Vec::new();
    let mut row = Vec::with_capacity(dim);
    let mut scratch = Vec::with_capacity(dim);
    for c in range {
        let s = CycleSample::from_raw(params, plan.sample(params, seed, c, &mut buf)?);
        s.features(&mut row);
        m.push(&row, &mut scratch);
        if let Some(k) = keep.as_deref_mut() {
            k.push(s);
        }
    }
    Ok(m)
}

fn run_inner(params: &SystemParams, policy: &Policy, cfg: &SimConfig, keep: bool) -> Result<(SimRun, Vec<CycleSample>)> {
    cfg.validate()?;
    let plan = Plan::new(params, policy, cfg.dt, cfg.bridge_correction)?;
    let layout = Layout { n: params.n() };
    let dim = layout.dim();
    let chunks: Vec<std::ops::Range<u64>> = (0..cfg.n_cycles.div_ceil(CHUNK))
        .map(|k| k * CHUNK..((k + 1) * CHUNK).min(cfg.n_cycles))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let parts: Vec<(Moments, Vec<CycleSample>)> = pool.install(|| {
        chunks
            .into_par_iter()
            .map(|r| {
                let mut kept = Vec::new();
                let m = simulate_chunk(params, &plan, cfg.seed, r, dim, keep.then_some(&mut kept))?;
                Ok((m, kept))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut moments = Moments::new(dim);
    let mut samples = Vec::new();
    for (m, kept) in parts {
        moments.merge(&m);
        samples.extend(kept);
    }
    let run = SimRun {
        params: params.clone(),
        policy: policy.to_string(),
        layout,
        moments,
        grid_step: plan.grid_step(),
    };
    Ok((run, samples))
}

/// Simulates `cfg.n_cycles` cycles.
pub fn run(params: &SystemParams, policy: &Policy, cfg: &SimConfig) -> Result<SimRun> {
    run_inner(params, policy, cfg, false).map(|(r, _)| r)
}

/// Like [`run`], also returning every cycle in index order.
pub fn run_with_samples(params: &SystemParams, policy: &Policy, cfg: &SimConfig) -> Result<(SimRun, Vec<CycleSample>)> {
    run_inner(params, policy, cfg, true)
}

impl SimRun {
    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    pub fn n_cycles(&self) -> u64 {
        self.moments.count()
    }

    pub fn grid_step(&self) -> Option<f64> {
        self.grid_step
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Delta-method estimate of `AWDR - (W mean(tau) - S2 / W) / 2`, the gap to
    /// the rate policy run at the same estimated frequency.
    pub fn awdr_gap_to_matched_irp(&self) -> Estimate {
        let w = self.params.weighted_drift();
        let s2 = self.params.weighted_variance();
        let a = self.waiting_coeffs();
        let m = self.moments.mean();
        let tau = m[Layout::TAU];
        let num: f64 = a.iter().zip(m).map(|(x, y)| x * y).sum();
        let value = num / tau - (w * tau - s2 / w) / 2.0;
        let mut grad: Vec<f64> = a.iter().map(|x| x / tau).collect();
        grad[Layout::TAU] += -num / (tau * tau) - w / 2.0;
        self.moments.delta(value, &grad)
    }

    /// Delta-method estimate of `AC - AC_IRP(W mean(tau))`.
    pub fn ac_gap_to_matched_irp(&self) -> Estimate {
        let w = self.params.weighted_drift();
        let s2 = self.params.weighted_variance();
        let mut a = self.waiting_coeffs();
        for (i, c) in self.params.c().iter().enumerate() {
            a[self.layout.n_at(i)] = *c;
        }
        let m = self.moments.mean();
        let tau = m[Layout::TAU];
        let ad = self.params.a_d();
        let num: f64 = ad + a.iter().zip(m).map(|(x, y)| x * y).sum::<f64>();
        let irp = ad / tau + w * tau / 2.0 + self.params.transport_rate() - s2 / (2.0 * w);
        let mut grad: Vec<f64> = a.iter().map(|x| x / tau).collect();
        grad[Layout::TAU] += -num / (tau * tau) + ad / (tau * tau) - w / 2.0;
        self.moments.delta(num / tau - irp, &grad)
    }

    fn waiting_coeffs(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.layout.dim()];
        for (i, w) in self.params.omega().iter().enumerate() {
            a[self.layout.int_n(i)] = *w;
        }
        a
    }

    pub fn ac(&self) -> Estimate {
        let mut a = self.waiting_coeffs();
        for (i, c) in self.params.c().iter().enumerate() {
            a[self.layout.n_at(i)] = *c;
        }
        self.moments.ratio(&a, self.params.a_d(), &self.layout.unit(Layout::TAU))
    }

    pub fn awdr(&self) -> Estimate {
        self.moments.ratio(&self.waiting_coeffs(), 0.0, &self.layout.unit(Layout::TAU))
    }

    pub fn moment(&self, which: Which) -> Result<Estimate> {
        let l = self.layout;
        let check = |i: usize| self.params.check_item(i).map(|_| i);
        let col = match which {
            Which::Tau => Layout::TAU,
            Which::Tau2 => Layout::TAU2,
            Which::TauB(i) => l.tau_b(check(i)?),
            Which::NAt(i) => l.n_at(check(i)?),
            Which::IntN(i) => l.int_n(check(i)?),
            Which::Load => l.load(),
            Which::Load2 => l.load2(),
        };
        Ok(self.moments.linear(&l.unit(col), 0.0))
    }

    /// Mean of `int N_i - (D_i tau^2 / 2 + sigma_i tau B_i(tau))`.
    pub fn unified_residual(&self, i: usize) -> Result<Estimate> {
        self.params.check_item(i)?;
        let l = self.layout;
        let mut a = vec![0.0; l.dim()];
        a[l.int_n(i)] = 1.0;
        a[Layout::TAU2] = -0.5 * self.params.d()[i];
        a[l.tau_b(i)] = -self.params.sigma()[i];
        Ok(self.moments.linear(&a, 0.0))
    }

    /// Mean of `sum omega_i int N_i - (L^2 / (2W) - S2 L / (2 W^2))`.
    pub fn load_identity_residual(&self) -> Estimate {
        let l = self.layout;
        let w = self.params.weighted_drift();
        let s2 = self.params.weighted_variance();
        let mut a = self.waiting_coeffs();
        a[l.load2()] = -1.0 / (2.0 * w);
        a[l.load()] = s2 / (2.0 * w * w);
        self.moments.linear(&a, 0.0)
    }

    /// `mean(L^2) - mean(L)^2` as plain sample values.
    pub fn load_jensen_gap(&self) -> f64 {
        let m = self.moments.mean();
        m[self.layout.load2()] - m[self.layout.load()].powi(2)
    }

    pub fn report(&self) -> SimReport {
        let per_item = (0..self.params.n())
            .map(|i| self.moments.linear(&self.layout.unit(self.layout.int_n(i)), 0.0))
            .collect();
        SimReport {
            policy: self.policy.clone(),
            n_cycles: self.n_cycles(),
            ac: self.ac(),
            awdr: self.awdr(),
            cycle_mean: self.moments.linear(&self.layout.unit(Layout::TAU), 0.0),
            per_item_waiting: per_item,
            grid_step: self.grid_step,
        }
    }
}

pub fn estimate_report(params: &SystemParams, policy: &Policy, cfg: &SimConfig) -> Result<SimReport> {
    Ok(run(params, policy, cfg)?.report())
}

pub fn estimate_moment(params: &SystemParams, policy: &Policy, cfg: &SimConfig, which: Which) -> Result<Estimate> {
    run(params, policy, cfg)?.moment(which)
}

pub fn check_unified_formula(params: &SystemParams, policy: &Policy, cfg: &SimConfig, i: usize) -> Result<Estimate> {
    params.check_item(i)?;
    run(params, policy, cfg)?.unified_residual(i)
}

/// Writes samples as CSV: `tau,n1..nn,intn1..intnn,taub1..taubn,load`.
pub fn write_samples_csv<W: Write>(samples: &[CycleSample], n: usize, mut out: W) -> Result<()> {
    let mut header = vec!["tau".to_string()];
    for prefix in ["n", "intn", "taub"] {
        header.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    header.push("load".into());
    writeln!(out, "{}", header.join(","))?;
    for s in samples {
        let mut fields = vec![format!("{:e}", s.tau)];
        for v in s.n_at_tau.iter().chain(&s.int_n).chain(&s.tau_b) {
            fields.push(format!("{v:e}"));
        }
        fields.push(format!("{:e}", s.weighted_load));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

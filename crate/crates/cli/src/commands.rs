//! One function per subcommand, each producing tables plus a failure list.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clearing_core::analytic::{self, QtpCase};
use clearing_core::fpt::{match_frequency, DriftedBM1D};
use clearing_core::simulate::{self, Estimate, SimConfig};
use clearing_core::verify::{self, TheoremCheck};
use clearing_core::{discriminant, Error, Policy, Sign, SystemParams};

use crate::output::{Cell, Format, Table};
use crate::Check;

/// Rendered tables and the descriptions of any failed checks.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let v: Vec<_> = self.tables.iter().map(Table::to_json).collect();
                let v = if v.len() == 1 { v.into_iter().next().unwrap() } else { serde_json::Value::Array(v) };
                serde_json::to_string_pretty(&v).expect("tables serialize") + "\n"
            }
            _ => self.tables.iter().map(|t| t.render(format)).collect::<Vec<_>>().join("\n"),
        }
    }
}

fn sign_name(s: Sign) -> &'static str {
    match s {
        Sign::Positive => "positive",
        Sign::Negative => "negative",
        Sign::Zero => "zero",
    }
}

pub fn optimize(params: &SystemParams) -> Result<Outcome> {
    let disc = discriminant(params);
    let qp = analytic::optimal_qp(params);
    let tp = analytic::optimal_tp(params);
    let irp = analytic::optimal_irp(params);
    let mut t = Table::new("optimal policies", &["quantity", "value"]);
    let mut row = |k: &str, v: Cell| t.row(vec![k.into(), v]);
    row("discriminant", disc.value.into());
    row("discriminant_sign", sign_name(disc.sign).into());
    row("Q_star", qp.param.into());
    row("T_star", tp.param.into());
    row("M_star", irp.param.into());
    row("Q_bar", analytic::q_bar(params).into());
    row("AC_QP", qp.ac.into());
    row("AC_TP", tp.ac.into());
    row("AC_IRP", irp.ac.into());
    row("qp_irp_gap", analytic::qp_irp_gap(params).into());
    let mut note = None;
    match analytic::optimal_qtp(params) {
        Ok(o) => {
            row("QTP_selection", match o.which { QtpCase::Qp => "QP", QtpCase::Tp => "TP" }.into());
            row("QTP_Q", o.q.into());
            row("QTP_T", o.t.into());
            row("AC_QTP", o.ac.into());
        }
        Err(Error::DegenerateDiscriminant(v)) => {
            row("QTP_selection", "degenerate".into());
            note = Some(format!("discriminant {v:e} is numerically zero; no joint optimum is claimed"));
        }
        Err(e) => return Err(e.into()),
    }
    if let Some(n) = note {
        t.note(n);
    }
    Ok(Outcome { tables: vec![t], failures: vec![] })
}

fn waiting_columns(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("waiting_{i}")).collect()
}

pub fn evaluate(params: &SystemParams, policy: &Policy) -> Result<Outcome> {
    let r = analytic::evaluate(params, policy)?;
    let mut t = Table::new(format!("{} ({})", r.policy, provenance_name(&r)), &["quantity", "value"]);
    t.row(vec!["AC".into(), r.ac.into()]);
    t.row(vec!["AWDR".into(), r.awdr.into()]);
    t.row(vec!["cycle_mean".into(), r.cycle_mean.into()]);
    if let Some(w) = &r.per_item_waiting {
        for (name, v) in waiting_columns(w.len()).into_iter().zip(w) {
            t.row(vec![name.into(), (*v).into()]);
        }
    }
    Ok(Outcome { tables: vec![t], failures: vec![] })
}

fn provenance_name(r: &analytic::PolicyReport) -> String {
    serde_json::to_value(r.provenance).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn simulate(params: &SystemParams, policy: &Policy, cfg: &SimConfig, samples: Option<&Path>) -> Result<Outcome> {
    let run = match samples {
        Some(path) => {
            let (run, cycles) = simulate::run_with_samples(params, policy, cfg)?;
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            simulate::write_samples_csv(&cycles, params.n(), BufWriter::new(file))?;
            run
        }
        None => simulate::run(params, policy, cfg)?,
    };
    let rep = run.report();
    let exact = analytic::evaluate(params, policy).ok();
    let mut t = Table::new(
        format!("{} Monte Carlo, {} cycles, seed {}", rep.policy, rep.n_cycles, cfg.seed),
        &["quantity", "estimate", "std_err", "ci_low", "ci_high", "analytic", "z"],
    );
    let mut row = |name: String, e: &Estimate, a: Option<f64>| {
        t.row(vec![
            name.into(),
            e.mean.into(),
            e.std_err.into(),
            e.ci_low.into(),
            e.ci_high.into(),
            a.into(),
            a.map(|x| e.z_score(x)).into(),
        ]);
    };
    row("AC".into(), &rep.ac, exact.as_ref().map(|r| r.ac));
    row("AWDR".into(), &rep.awdr, exact.as_ref().map(|r| r.awdr));
    row("cycle_mean".into(), &rep.cycle_mean, exact.as_ref().map(|r| r.cycle_mean));
    let items = exact.as_ref().and_then(|r| r.per_item_waiting.clone());
    for (i, (name, e)) in waiting_columns(params.n()).into_iter().zip(&rep.per_item_waiting).enumerate() {
        row(name, e, items.as_ref().map(|w| w[i]));
    }
    if let Some(h) = rep.grid_step {
        t.note(format!("grid step {h:e}"));
    }
    Ok(Outcome { tables: vec![t], failures: vec![] })
}

pub fn compare(params: &SystemParams, frequency: f64, caps: &[f64]) -> Result<Outcome> {
    if !(frequency > 0.0 && frequency.is_finite()) {
        bail!(Error::NonPositiveParameter { name: "frequency", value: frequency });
    }
    let d = params.total_drift();
    let scalar = DriftedBM1D::weighted(params);
    let mut policies = vec![
        Policy::Irp { m: frequency * params.weighted_drift() },
        Policy::Qp { q: frequency * d },
        Policy::Tp { t: frequency },
        Policy::Qtp { q: 0.5 * frequency * d, t: 0.5 * frequency },
    ];
    let mut sorted = caps.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &k in &sorted {
        if !(k > 1.0) {
            bail!(Error::Infeasible(format!("cap multiple {k} must exceed 1")));
        }
        let t_h = k * frequency;
        let m = match_frequency(&scalar, frequency, t_h)?;
        policies.push(Policy::Irhp { m, t: t_h });
    }
    let reports = policies.iter().map(|p| analytic::evaluate(params, p)).collect::<clearing_core::Result<Vec<_>>>()?;
    let irp = &reports[0];
    let tp = &reports[2];
    let mut t = Table::new(
        format!("policies matched to E[tau] = {frequency}"),
        &["policy", "kind", "cycle_mean", "AWDR", "AC", "AWDR_minus_IRP", "provenance"],
    );
    for (p, r) in policies.iter().zip(&reports) {
        t.row(vec![
            r.policy.clone().into(),
            p.kind().into(),
            r.cycle_mean.into(),
            r.awdr.into(),
            r.ac.into(),
            (r.awdr - irp.awdr).into(),
            provenance_name(r).into(),
        ]);
    }
    let slack = |v: f64| 1e-7 * v.abs().max(1.0);
    let hybrids = &reports[4..];
    let irp_minimal = reports.iter().all(|r| r.awdr + slack(r.awdr) >= irp.awdr);
    let beats_tp = hybrids.iter().all(|r| r.awdr < tp.awdr && r.ac < tp.ac);
    let decreasing = hybrids.windows(2).all(|w| w[1].awdr <= w[0].awdr + slack(w[0].awdr));
    let flags = [
        ("IRP has the smallest AWDR", irp_minimal),
        ("every IRHP beats TP in AWDR and AC", beats_tp),
        ("IRHP AWDR decreases toward IRP as the cap grows", decreasing),
    ];
    let mut failures = vec![];
    let mut ft = Table::new("orderings", &["claim", "holds"]);
    for (claim, ok) in flags {
        ft.row(vec![claim.into(), ok.into()]);
        if !ok {
            failures.push(claim.to_string());
        }
    }
    Ok(Outcome { tables: vec![t, ft], failures })
}

pub fn verify(params: Option<&SystemParams>, checks: &[Check], frequency: Option<f64>, mc: Option<&SimConfig>) -> Result<Outcome> {
    let mut results: Vec<TheoremCheck> = vec![];
    let need = || params.context("--params <path> is required for this check");
    for c in checks {
        let r = match c {
            Check::SignLaw => verify::check_theorem_1(need()?)?,
            Check::Joint => verify::check_theorem_9(need()?, 200)?,
            Check::Optimality => verify::check_theorem_13_15(need()?, mc.map(|cfg| (cfg, 3)))?,
            Check::Matched | Check::Hybrid => {
                let p = need()?;
                let f = match frequency {
                    Some(f) => f,
                    None => analytic::optimal_irp(p).param / p.weighted_drift(),
                };
                if *c == Check::Matched {
                    verify::check_theorem_18(p, f, mc.map(|cfg| (cfg, 3)))?
                } else {
                    verify::check_theorem_19(p, f, &[1.5, 2.0, 4.0])?
                }
            }
            Check::KeyInequality => {
                let grid = verify::key_inequality_grid();
                let witnesses = mc.map(|cfg| (&[0usize, 312, 624][..], cfg.n_cycles, cfg.seed));
                verify::check_key_inequality(&grid, witnesses)?
            }
        };
        results.push(r);
    }
    let mut t = Table::new("checks", &["check", "status", "witnesses", "failed", "min_margin", "runtime_ms"]);
    let mut failures = vec![];
    for r in &results {
        let failed: Vec<_> = r.failures().collect();
        let min_margin = r.witnesses.iter().map(|w| w.margin).fold(f64::INFINITY, f64::min);
        t.row(vec![
            r.name.clone().into(),
            if r.passed() { "pass" } else { "fail" }.into(),
            r.witnesses.len().into(),
            failed.len().into(),
            if min_margin.is_finite() { Cell::Num(min_margin) } else { Cell::Empty },
            (r.runtime_ms as usize).into(),
        ]);
        for w in failed {
            failures.push(format!("{}: {} inputs={} values={}", r.name, w.label, w.inputs, w.values));
        }
    }
    if let Some(cfg) = mc {
        t.note(format!("Monte Carlo witnesses: {} cycles, seed {}", cfg.n_cycles, cfg.seed));
    }
    Ok(Outcome { tables: vec![t], failures })
}

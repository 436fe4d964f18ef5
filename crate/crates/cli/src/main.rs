//! `clearing-lab`: optimize, evaluate, simulate, compare and verify clearing
//! policies for a parameter file.

mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use clearing_core::{Policy, SystemParams};

use output::Format;

/// Seed used when neither `--seed`, the environment nor `--entropy` is given.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Parser)]
#[command(name = "clearing-lab", version, about = "Cost and delay of clearing policies for drifted Brownian inputs")]
pub struct Cli {
    /// JSON parameter file with fields d, sigma, c, omega, a_d.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: Format,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal thresholds and minimized costs of every policy family.
    Optimize,
    /// Closed-form (or quadrature) AC and AWDR of one policy.
    Evaluate(PolicyArgs),
    /// Monte Carlo estimates of one policy, next to closed forms when known.
    Simulate {
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Also dump per-cycle samples as CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// All policies matched to one expected cycle length.
    Compare {
        /// Target expected cycle length.
        #[arg(long)]
        frequency: f64,
        /// Caps of the hybrid policy as multiples of the frequency.
        #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.0, 4.0])]
        caps: Vec<f64>,
    },
    /// Run the comparison checks; exits nonzero when any fails.
    Verify {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = Check::all())]
        checks: Vec<Check>,
        /// Expected cycle length for the matched-frequency checks; defaults
        /// to the one of the optimal rate policy.
        #[arg(long)]
        frequency: Option<f64>,
        /// Add Monte Carlo witnesses with this many cycles per run.
        #[arg(long)]
        cycles: Option<u64>,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Qp,
    Tp,
    Qtp,
    Irp,
    Irhp,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum)]
    policy: PolicyKind,
    #[arg(long = "Q")]
    q: Option<f64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long = "M")]
    m: Option<f64>,
}

impl PolicyArgs {
    pub fn to_policy(&self) -> Result<Policy> {
        let need = |v: Option<f64>, flag: &str| v.with_context(|| format!("--{flag} is required for --policy {:?}", self.policy));
        let p = match self.policy {
            PolicyKind::Qp => Policy::Qp { q: need(self.q, "Q")? },
            PolicyKind::Tp => Policy::Tp { t: need(self.t, "T")? },
            PolicyKind::Qtp => Policy::Qtp { q: need(self.q, "Q")?, t: need(self.t, "T")? },
            PolicyKind::Irp => Policy::Irp { m: need(self.m, "M")? },
            PolicyKind::Irhp => Policy::Irhp { m: need(self.m, "M")?, t: need(self.t, "T")? },
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long, env = "CLEARING_LAB_SEED", default_value_t = DEFAULT_SEED, conflicts_with = "entropy")]
    seed: u64,
    /// Draw a fresh seed from the operating system; it is printed with the results.
    #[arg(long)]
    entropy: bool,
}

impl SeedArgs {
    pub fn resolve(&self) -> u64 {
        if self.entropy {
            use std::hash::{BuildHasher, RandomState};
            RandomState::new().hash_one(std::time::SystemTime::now())
        } else {
            self.seed
        }
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    cycles: u64,
    /// Grid step for gridded policies.
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Stop hybrid cycles at grid points only.
    #[arg(long)]
    no_bridge_correction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    #[value(name = "theorem_1")]
    SignLaw,
    #[value(name = "theorem_9")]
    Joint,
    #[value(name = "theorem_13_15")]
    Optimality,
    #[value(name = "theorem_18")]
    Matched,
    #[value(name = "theorem_19")]
    Hybrid,
    #[value(name = "key_inequality")]
    KeyInequality,
}

impl Check {
    fn all() -> Vec<Check> {
        Check::value_variants().to_vec()
    }
}

fn load_params(cli: &Cli) -> Result<SystemParams> {
    let path = cli.params.as_ref().context("--params <path> is required")?;
    SystemParams::from_json_file(path).with_context(|| format!("cannot load {}", path.display()))
}

fn run(cli: &Cli) -> Result<commands::Outcome> {
    match &cli.command {
        Command::Optimize => commands::optimize(&load_params(cli)?),
        Command::Evaluate(p) => commands::evaluate(&load_params(cli)?, &p.to_policy()?),
        Command::Simulate { policy, sim, samples } => {
            let cfg = clearing_core::simulate::SimConfig {
                n_cycles: sim.cycles,
                dt: sim.dt,
                seed: sim.seed.resolve(),
                bridge_correction: !sim.no_bridge_correction,
                workers: sim.workers,
            };
            commands::simulate(&load_params(cli)?, &policy.to_policy()?, &cfg, samples.as_deref())
        }
        Command::Compare { frequency, caps } => commands::compare(&load_params(cli)?, *frequency, caps),
        Command::Verify { checks, frequency, cycles, seed, workers } => {
            let needs_params = checks.iter().any(|c| *c != Check::KeyInequality);
            let params = if needs_params { Some(load_params(cli)?) } else { None };
            let mc = cycles.map(|n| clearing_core::simulate::SimConfig {
                n_cycles: n,
                seed: seed.resolve(),
                workers: *workers,
                ..Default::default()
            });
            commands::verify(params.as_ref(), checks, *frequency, mc.as_ref())
        }
    }
}

fn write_out(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out: Vec<String> = vec![];
    for cause in e.chain() {
        let msg = cause.to_string();
        if out.last().is_some_and(|prev| prev.ends_with(&msg)) {
            continue;
        }
        out.push(msg);
    }
    out.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        write_out(&cli, &outcome.render(cli.format))?;
        if !outcome.failures.is_empty() {
            for f in &outcome.failures {
                eprintln!("FAILED: {f}");
            }
            bail!("{} check(s) failed", outcome.failures.len());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use commands::CliError;
use config::{ConfigFile, GlobalFlags, OutputMode, RunConfig, OUT_DIR_ENV};

/// Sign-indexed propagator constructions and their numerical checks.
#[derive(Debug, Parser)]
#[command(name = "sicprop", version)]
struct Cli {
    /// Flat key=value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (also set by SICPROP_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// csv | json | both
    #[arg(long, global = true)]
    output: Option<OutputMode>,
    /// Largest Hilbert-space dimension a command may allocate.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    /// Tolerance override, name=value; repeatable.
    #[arg(long, global = true)]
    tol: Vec<String>,
    /// Run every kernel on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Add a Unix timestamp to the JSON document.
    #[arg(long, global = true)]
    timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dual-oracle overlap against its closed form.
    Oracle(commands::OracleArgs),
    /// Diagonal phase propagators from elementary spin rotations.
    Synthesize(commands::SynthesizeArgs),
    /// Subspace transfer pipelines and truncation error.
    Transfer(commands::TransferArgs),
    /// Oscillator eigenbasis expansion of a state.
    Expand(commands::ExpandArgs),
    /// Closed-form Green kernels on a grid.
    Green(commands::GreenArgs),
    /// Compose two quadratic kernels.
    Compose(commands::ComposeArgs),
    /// Time-sliced lattice propagation and its convergence rate.
    Pathint(commands::PathintArgs),
    /// Dyson iteration error against exact evolution.
    Perturb(commands::PerturbArgs),
    /// Run every acceptance criterion.
    VerifyAll(commands::VerifyArgs),
}

impl Command {
    fn keys(&self) -> &'static [&'static str] {
        match self {
            Self::Oracle(_) => commands::ORACLE_KEYS,
            Self::Synthesize(_) => commands::SYNTHESIZE_KEYS,
            Self::Transfer(_) => commands::TRANSFER_KEYS,
            Self::Expand(_) => commands::EXPAND_KEYS,
            Self::Green(_) => commands::GREEN_KEYS,
            Self::Compose(_) => commands::COMPOSE_KEYS,
            Self::Pathint(_) => commands::PATHINT_KEYS,
            Self::Perturb(_) => commands::PERTURB_KEYS,
            Self::VerifyAll(_) => commands::VERIFY_KEYS,
        }
    }

    fn run(&self, cfg: &ConfigFile, run: &RunConfig) -> Result<output::Outcome, CliError> {
        match self {
            Self::Oracle(a) => commands::oracle(a, cfg, run),
            Self::Synthesize(a) => commands::synthesize(a, cfg, run),
            Self::Transfer(a) => commands::transfer(a, cfg, run),
            Self::Expand(a) => commands::expand(a, cfg, run),
            Self::Green(a) => commands::green(a, cfg, run),
            Self::Compose(a) => commands::compose(a, cfg, run),
            Self::Pathint(a) => commands::pathint(a, cfg, run),
            Self::Perturb(a) => commands::perturb(a, cfg, run),
            Self::VerifyAll(a) => commands::verify_all(a, cfg, run),
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    cfg.check_keys(cli.command.keys())?;
    let flags = GlobalFlags {
        seed: cli.seed,
        max_dim: cli.max_dim,
        output: cli.output,
        out_dir: cli.out_dir.clone(),
        tol: cli.tol.clone(),
        sequential: cli.sequential,
    };
    let run = RunConfig::resolve(&flags, &cfg, std::env::var(OUT_DIR_ENV).ok())?;
    let outcome = cli.command.run(&cfg, &run)?;
    let ts = cli.timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let doc = outcome.document(&run, ts);
    outcome
        .write(&run, &doc)
        .map_err(|e| CliError::Failure(format!("cannot write to {}: {e}", run.out_dir.display())))?;
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

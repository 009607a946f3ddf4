//! `cauchylab`: configuration-driven experiments.
//!
//! Exit status: 0 when every check passes, 1 on an invariant violation,
//! 2 on usage, configuration or I/O errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use output::Out;

#[derive(Parser)]
#[command(name = "cauchylab", version, about = "Operator-valued measure and scattering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calderón–Zygmund decompositions with the full verifier.
    Cz(Common),
    /// Maximal-function weak-L¹ sweeps of one measure against the bounds.
    Weaknorm(Common),
    /// Resolvent identities, boundary ladders, wave and determinant probes.
    Scatter(Common),
    /// Ensemble audit of all four maximal operators.
    Sweep(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Cz(_) => "cz",
            Command::Weaknorm(_) => "weaknorm",
            Command::Scatter(_) => "scatter",
            Command::Sweep(_) => "sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Cz(c) | Command::Weaknorm(c) | Command::Scatter(c) | Command::Sweep(c) => c,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Experiment document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the document.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cmd: &Command) -> Result<bool> {
    let common = cmd.common();
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(c) = &cfg.command {
        if c != cmd.name() {
            bail!("config is for command {c:?}, not {:?}", cmd.name());
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    let threads = cfg.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let out = Out::new(&common.out)?;
    pool.install(|| match cmd {
        Command::Cz(_) => commands::cz(&cfg, &out),
        Command::Weaknorm(_) => commands::weaknorm(&cfg, &out),
        Command::Scatter(_) => commands::scatter(&cfg, &out),
        Command::Sweep(_) => commands::sweep(&cfg, &out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cauchylab {}: checks failed; see summary.json", cli.command.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("cauchylab {}: error: {e:#}", cli.command.name());
            ExitCode::from(2)
        }
    }
}

//! `dampwave`: runs the laboratory experiments from a TOML configuration and
//! writes `<command>.csv` plus `summary.json` into the output directory.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Frequency-domain experiments for damped wave equations")]
struct Cli {
    /// TOML experiment file; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads for frequency sweeps (results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Checks positivity, symbol bounds and the limsup condition on b
    Assumptions,
    /// Assembles E(t,0,ξ) and compares it with direct integration
    Propagate,
    /// Verifies the diagonalization identity and symbol-class margins
    DiagVerify,
    /// Computes the wave operator on a frequency grid
    Scatter,
    /// Measures a decay rate and compares it with the prediction
    Rates,
    /// Tests the Volterra solver against closed forms and the oracle
    VolterraTest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Assumptions => "assumptions",
            Command::Propagate => "propagate",
            Command::DiagVerify => "diag-verify",
            Command::Scatter => "scatter",
            Command::Rates => "rates",
            Command::VolterraTest => "volterra-test",
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    anyhow::ensure!(n >= 1, "--threads must be at least 1");
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    configure_threads(cli.threads)?;
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let outcome = match cli.command {
        Command::Assumptions => run::assumptions(&cfg),
        Command::Propagate => run::propagate(&cfg),
        Command::DiagVerify => run::diag_verify(&cfg),
        Command::Scatter => run::scatter(&cfg),
        Command::Rates => run::rates(&cfg),
        Command::VolterraTest => run::volterra_test(&cfg),
    }
    .with_context(|| format!("running `{}`", cli.command.name()))?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut summary = outcome.summary;
    summary.rows = outcome.table.len();
    outcome.table.write(&cli.out.join(format!("{}.csv", cli.command.name())))?;
    summary.write(&cli.out.join("summary.json"))?;
    for v in &summary.verdicts {
        println!("{} criterion {} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.criterion, v.name, v.detail);
    }
    Ok(summary.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

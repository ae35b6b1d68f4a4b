//! `g2flow`: runs the flow, the variational checks and the identity suite
//! from a TOML configuration.
//!
//! Exit codes: 0 success, 1 check failure, 2 configuration error,
//! 3 numerical abort.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use g2flow::config::RunConfig;
use g2flow::Error;

use commands::{ConfigError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "g2flow", version, about = "Isometric flow of G2-structures on flat 7-tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for randomized suites, overriding `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads (all cores when absent).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
enum Command {
    /// Exact and sampled identity checks on the structure tables.
    Verify,
    /// Integrate the flow and write the diagnostic time series.
    Evolve,
    /// Finite-difference gradient checks of the energy.
    Energy,
    /// Smallest eigenvalues of the second variation and of the Laplacian.
    Spectrum,
    /// Coercivity sampling of the principal symbol.
    Symbol,
    /// Print the structure tables as JSON (or write them under --out).
    DumpTables,
}

const CHECK_FAILURE: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const NUMERICAL_ABORT: u8 = 3;

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| ConfigError(anyhow!("{}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    config.validate().map_err(|e| ConfigError(e.into()))?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError(anyhow!("--threads must be at least 1")).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = load_config(cli)?;
    let out = config.output.dir.clone();
    match cli.command {
        Command::Verify => commands::verify(&config, &out),
        Command::Evolve => commands::evolve_cmd(&config, &out),
        Command::Energy => commands::energy(&config, &out),
        Command::Spectrum => commands::spectrum(&config, &out),
        Command::Symbol => commands::symbol(&config, &out),
        Command::DumpTables => commands::dump_tables(&config, cli.out.as_deref()),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.is::<ConfigError>() {
        return CONFIG_ERROR;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::ChartExit { .. }
            | Error::OutsideChart { .. }
            | Error::NonFinite(_)
            | Error::NoConvergence { .. },
        ) => NUMERICAL_ABORT,
        _ => CHECK_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(CHECK_FAILURE),
        Ok(Outcome::Aborted) => ExitCode::from(NUMERICAL_ABORT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

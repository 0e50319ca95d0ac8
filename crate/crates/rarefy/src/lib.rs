//! Command-line runner for the `rarefaction-core` models.
//!
//! ```text
//! rarefy <roots|spectrum|survival|simulate|experiment> --config run.toml
//!        [--seed U64] [--threads N] [--out DIR]
//! ```
//!
//! Outputs are deterministic given the configuration and seed, whatever the
//! thread count. Exit codes: 0 success, 1 I/O failure, 2 invalid
//! configuration, 3 refusal of a time below the certified range, 4 numerical
//! failure.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;

use config::RunConfig;
pub use error::CliError;
use exec::Rayon;

#[derive(Debug, Parser)]
#[command(name = "rarefy", version, about = "Absorbed diffusions and their Poisson rarefaction limit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the first zeros of J0 as CSV `m,mu`.
    Roots(Common),
    /// Write `spectrum.csv` and print the Parseval defect.
    Spectrum(Common),
    /// Write `survival.csv` from the certified series.
    Survival(Common),
    /// Monte Carlo survival estimate, written to `simulate.json`.
    Simulate(Common),
    /// Rarefaction trials over a list of times: `report.json` and `pmf.csv`.
    Experiment(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory; overrides the configured one, default `.`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Roots(c)
            | Command::Spectrum(c)
            | Command::Survival(c)
            | Command::Simulate(c)
            | Command::Experiment(c) => c,
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let common = cli.command.common();
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Roots(_) => commands::roots(&config, stdout),
        Command::Spectrum(_) => commands::spectrum(&config, &out, stdout),
        Command::Survival(_) => commands::survival(&config, &out),
        Command::Simulate(_) => commands::simulate(&config, &out, &Rayon, stdout),
        Command::Experiment(_) => commands::experiment(&config, &out, &Rayon),
    })
}

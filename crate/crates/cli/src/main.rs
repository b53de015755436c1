//! `elastiv` — trade-elasticity estimation pipeline.
//!
//! Subcommands: `estimate`, `supply`, `shares`, `select-instruments`,
//! `simulate`, `mc`. Exit status: 0 on success, 1 on estimation failure,
//! 2 on configuration or data errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{DgpConfig, RunConfig};
use elastiv::Result;

#[derive(Parser)]
#[command(name = "elastiv", version, about = "Trade-elasticity estimation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-regime fixed-effects IV estimation with the three-panel report.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// HAC bandwidth (overrides the config).
        #[arg(long)]
        bandwidth: Option<usize>,
        /// Instruments per partner (overrides the config).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Supply-side 2SLS on the unit-value subsample.
    Supply {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        bandwidth: Option<usize>,
    },
    /// Per-period partner shares of trade value.
    Shares {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation-screened third-country instrument assignments.
    SelectInstruments {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate a synthetic panel in the standard file schemas.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo validation of the estimators on synthetic data.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate {
            config,
            out,
            bandwidth,
            k,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(b) = bandwidth {
                cfg.bandwidth = b;
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            commands::cmd_estimate(&cfg)
        }
        Command::Supply {
            config,
            out,
            bandwidth,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(b) = bandwidth {
                cfg.bandwidth = b;
            }
            commands::cmd_supply(&cfg)
        }
        Command::Shares { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            commands::cmd_shares(&cfg)
        }
        Command::SelectInstruments { config, out, k } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            commands::cmd_select_instruments(&cfg)
        }
        Command::Simulate { config, out, seed } => {
            let mut cfg = DgpConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            commands::cmd_simulate(&cfg)
        }
        Command::Mc {
            config,
            out,
            seed,
            reps,
        } => {
            let mut cfg = DgpConfig::load(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(reps) = reps {
                cfg.reps = reps;
            }
            commands::cmd_mc(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

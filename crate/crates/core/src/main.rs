use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dimlight::cli::{self, CliError, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "dimlight",
    version,
    about = "DVS dim-light event delay simulator and analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate event streams for the configured stimulus.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides rng_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Histogram trigger times per (mu, L) cell, detect gaps, fit curves.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict output to cells, e.g. "50:10,100:20".
        #[arg(long)]
        cells: Option<String>,
    },
    /// Least-squares k_delay from a CSV of (mu, gap) rows.
    Calibrate {
        /// Accepted for symmetry with the other commands; not read.
        #[arg(long)]
        config: Option<PathBuf>,
        gaps_csv: PathBuf,
    },
    /// Compare the closed-form delay with the capacitor integrator.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_CONFIG as u8),
            };
        }
    };
    let result = match args.command {
        Command::Simulate { config, out, seed } => cli::simulate(&config, out.as_deref(), seed),
        Command::Analyze { config, out, cells } => {
            cli::analyze(&config, out.as_deref(), cells.as_deref())
        }
        Command::Calibrate { gaps_csv, .. } => cli::calibrate(&gaps_csv),
        Command::Oracle { config } => cli::oracle(&config),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::exit_code(&e) as u8)
        }
    }
}

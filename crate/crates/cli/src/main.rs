use std::path::PathBuf;
use std::process::ExitCode;

use certerr_cli::check::run_check;
use certerr_cli::config::{ExperimentConfig, SEED_ENV};
use certerr_cli::plotdata::write_plotdata;
use certerr_cli::run_experiment;
use clap::{Parser, Subcommand};

/// Guaranteed error equalities and two-sided bounds for reaction-convection-diffusion.
#[derive(Parser)]
#[command(name = "certerr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Run every catalog case against every theorem its regime admits.
    Check {
        /// Write per-case reports under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit two-column .dat files (h vs ERR, h vs M, level vs efficiency) from a report CSV.
    Plotdata {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit status: 0 all invariants pass, 1 an invariant failed, 2 usage or pre-flight error.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => ExperimentConfig::load(&config).and_then(|cfg| run_experiment(&cfg)).map(|s| {
            print!("{}", s.to_text());
            s.passed()
        }),
        Command::Check { out } => {
            let seed = std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0);
            run_check(out.as_deref(), seed).map(|all| {
                for s in &all {
                    print!("{}", s.to_text());
                }
                all.iter().all(|s| s.passed())
            })
        }
        Command::Plotdata { csv, out } => write_plotdata(&csv, out.as_deref()).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

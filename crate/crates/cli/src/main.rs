//! `dirmix` — seeded experiments on random walks over sparse random
//! directed graphs: degree statistics, environment sampling, distance
//! profiles, equilibrium weights, size limits, and a verification suite.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use dirmix_cli::config::{Overrides, RawConfig};
use dirmix_cli::{commands, verify, CliError};

/// Random walks on sparse random directed graphs: cutoff profiles,
/// equilibrium measures, and their large-size limits, reproducibly from a
/// seed.
#[derive(Parser)]
#[command(name = "dirmix", version)]
struct Cli {
    /// Experiment description (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base seed; overrides the config file. Required in one of the two.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory; overrides the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads. Affects speed only; outputs are identical for any
    /// value.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print degree-sequence statistics and the cutoff location.
    Stats,
    /// Sample environments; write graph files and a summary table.
    Gen,
    /// Distance-to-equilibrium profiles and the window comparison table.
    Profile,
    /// Equilibrium weights, their histogram, and the convergence-bound
    /// table.
    Equilibrium,
    /// Fixed-point pool, limit weights, martingale moments, and coupling
    /// distances.
    Limits,
    /// Run the verification suite and write its report.
    Verify,
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(jobs) = cli.jobs {
        // A second initialization in the same process is harmless: thread
        // count never changes outputs, only speed.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Infeasible("--config <PATH> is required".into()))?;
    let raw = RawConfig::from_file(&path)?;
    let cfg = raw.resolve(&Overrides { seed: cli.seed, out_dir: cli.out })?;
    match cli.command {
        Command::Stats => commands::cmd_stats(&cfg),
        Command::Gen => commands::cmd_gen(&cfg),
        Command::Profile => commands::cmd_profile(&cfg),
        Command::Equilibrium => commands::cmd_equilibrium(&cfg),
        Command::Limits => commands::cmd_limits(&cfg),
        Command::Verify => {
            let (text, report) = verify::cmd_verify(&cfg)?;
            if report.failed_criteria() > 0 {
                // Show the full report before the failure exit so the
                // measured numbers are always visible.
                print!("{text}");
                return Err(CliError::Verification {
                    failed: report.failed_criteria(),
                    total: report.total_criteria(),
                });
            }
            Ok(text)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => print!("{text}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

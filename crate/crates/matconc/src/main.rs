use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use matconc::commands::{cmd_boundary, cmd_oja, cmd_simulate, cmd_tail, cmd_verify, Report};
use matconc::error::exit;
use matconc::runner::default_threads;
use matconc::{CliError, Overrides, RunConfig};

/// Time-uniform concentration boundaries for products of random matrices.
///
/// Flags override values from the config file, which override defaults.
#[derive(Debug, Parser)]
#[command(name = "matconc", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides experiment.master_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of trajectories (overrides experiment.trajectories).
    #[arg(long, global = true)]
    trajectories: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate fixed-time, anytime, and smooth boundaries.
    Boundary,
    /// Estimate the anytime violation rate by Monte Carlo.
    Simulate,
    /// Exact checks by path enumeration (finite-support sources).
    Verify,
    /// Empirical tail of the normalized martingale against the analytic bound.
    Tail,
    /// Oja's streaming PCA iterate next to the product deviation.
    Oja,
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        path: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        trajectories: cli.trajectories,
        out: cli.out.clone(),
    });
    let resolved = cfg.resolve()?;
    let report = match cli.command {
        Command::Boundary => cmd_boundary(&resolved)?,
        Command::Simulate => cmd_simulate(&resolved, default_threads()?)?,
        Command::Verify => cmd_verify(&resolved, default_threads()?)?,
        Command::Tail => cmd_tail(&resolved, default_threads()?)?,
        Command::Oja => cmd_oja(&resolved)?,
    };
    report.write(resolved.output_dir())?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::OK };
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                print!("{}", report.summary);
            }
            if report.failed {
                if cli.quiet {
                    // Failures are reported even when quiet.
                    eprint!("{}", report.summary);
                }
                ExitCode::from(exit::VERIFY_FAIL as u8)
            } else {
                ExitCode::from(exit::OK as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

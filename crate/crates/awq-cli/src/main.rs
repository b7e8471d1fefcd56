mod commands;
mod config;
mod error;
mod table;

use awq::verify::Suite;
use clap::{Parser, Subcommand};
use commands::{EvalTarget, TableKind, DEFAULT_SEED};
use config::RunParams;
use error::{CliError, CliResult};
use std::path::PathBuf;
use std::process::ExitCode;
use table::Format;

/// Evaluate q-series families and run the identity verification suites.
///
/// Exit status: 0 on success, 2 for invalid configuration, 3 when a
/// computation fails or a verification check does not pass.
#[derive(Debug, Parser)]
#[command(name = "awq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON parameter file; omitted fields take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for randomised checks
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override (route agreement for eval, numerical checks for verify)
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate one family over the configured points and degrees
    Eval {
        #[arg(value_enum)]
        target: EvalTarget,
    },
    /// Run a verification suite and emit one report per check
    Verify { suite: Suite },
    /// Print parameter tables
    Table {
        #[arg(value_enum)]
        kind: TableKind,
    },
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Validation(format!("--tol {t} must be positive and finite")));
        }
    }
    let cfg = RunParams::load(cli.config.as_deref())?.validate()?;
    match &cli.command {
        Command::Eval { target } => emit(cli, &commands::eval(*target, &cfg, cli.tol)?.render(cli.format)?),
        Command::Table { kind } => emit(cli, &commands::table(*kind, &cfg)?.render(cli.format)?),
        Command::Verify { suite } => {
            let (text, failed) = commands::verify(*suite, &cfg, cli.seed.unwrap_or(DEFAULT_SEED), cli.tol, cli.format)?;
            emit(cli, &text)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::ChecksFailed(failed))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("awq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, FigureKind};
use config::{CommonArgs, RunConfig};

/// Cramér-Rao and Cramér-Rao-Leibniz bounds for parameter-dependent supports.
#[derive(Debug, Parser)]
#[command(name = "crllb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// J, D_L, L, CRLB, CRLLB and MLE covariance for one model.
    Bound(CommonArgs),
    /// Monte Carlo check of the bound, the covariance and unbiasedness.
    Mc(CommonArgs),
    /// Parameter sweep written as CSV.
    Figure {
        #[arg(value_enum)]
        kind: FigureKind,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Integral identities and Leibniz boundary-term cross-checks.
    Identities(CommonArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bound(args) => commands::bound(&RunConfig::resolve(&args)?),
        Command::Mc(args) => commands::mc(&RunConfig::resolve(&args)?),
        Command::Figure { kind, args } => commands::figure(kind, &RunConfig::resolve(&args)?),
        Command::Identities(args) => commands::identities(&RunConfig::resolve(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

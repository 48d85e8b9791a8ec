mod commands;
mod config;
mod output;
mod summary;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use defirisk::Error;

use crate::config::{GlobalArgs, RunConfig};

/// Frequency-severity pricing and tail risk for DeFi exploit cover.
#[derive(Debug, Parser)]
#[command(name = "defirisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Fit one attack-frequency model per portfolio protocol.
    FitFrequency,
    /// Fit the two-part loss-ratio model.
    FitSeverity,
    /// Quote expectation and standard-deviation premiums.
    Price,
    /// Simulate aggregate losses and report VaR and CTE.
    Simulate,
    /// Hosmer-Lemeshow tests and quantile residuals for fitted models.
    Gof,
    /// Descriptive statistics of the incident file.
    Summarize,
}

fn run(cli: &Cli) -> defirisk::Result<()> {
    let cfg = RunConfig::from_args(&cli.global)?;
    match cli.command {
        Command::FitFrequency => commands::fit_frequency_cmd(&cfg),
        Command::FitSeverity => commands::fit_severity_cmd(&cfg),
        Command::Price => commands::price_cmd(&cfg),
        Command::Simulate => commands::simulate_cmd(&cfg),
        Command::Gof => commands::gof_cmd(&cfg),
        Command::Summarize => commands::summarize_cmd(&cfg),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() || matches!(e, Error::Domain(_)) {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{doc}");
            ExitCode::from(exit_code(&e))
        }
    }
}

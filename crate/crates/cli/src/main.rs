//! `thinshell`: batch runner for the numerical experiments.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage error,
//! 3 numeric error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Experiment;
use error::CliError;

#[derive(Parser)]
#[command(name = "thinshell", version, about = "Thin-shell experiments for convex measures")]
struct Cli {
    /// Print the resolved JSON config and exit without running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    #[command(flatten)]
    Experiment(Experiment),
    /// Run an experiment from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn resolve(command: Command) -> Result<Experiment, CliError> {
    match command {
        Command::Experiment(e) => Ok(e),
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", config.display())))?;
            Experiment::from_json(&text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command).and_then(|exp| {
        if cli.print_config {
            println!("{}", serde_json::to_string_pretty(&exp).expect("configs serialize"));
            return Ok(true);
        }
        commands::run(&exp)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("thinshell: {e}");
            e.exit_code()
        }
    }
}

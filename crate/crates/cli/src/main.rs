//! `mlmoment`: multi-level reconstruction of periodic band-limited signals
//! from irregular noisy samples.
//!
//! Exit codes: 0 success, 1 configuration error, 2 level cap reached without
//! the global discrepancy rule firing, 3 I/O error, 4 failed self-checks.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use commands::{Outcome, RunArgs, SweepArgs, VerifyArgs};
use config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "mlmoment", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log more (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one reconstruction and write its report.
    Run(RunArgs),
    /// Vary one config key over a list of values, runs in parallel.
    Sweep(SweepArgs),
    /// Check operators and solvers against dense linear algebra.
    Verify(VerifyArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<mlmoment::Error>() {
            return match e {
                mlmoment::Error::Io(_) => 3,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::LevelCap) => {
            eprintln!("level cap reached without the global discrepancy rule firing");
            ExitCode::from(2)
        }
        Ok(Outcome::ChecksFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

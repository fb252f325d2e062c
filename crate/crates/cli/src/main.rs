//! `mlspl` command-line front end.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};

/// Sizes the global worker pool from `MLSPL_THREADS` when set.
fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("MLSPL_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("MLSPL_THREADS must be a positive integer, got {value:?}"))?;
    anyhow::ensure!(n > 0, "MLSPL_THREADS must be a positive integer, got 0");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Benchmark(a) => commands::benchmark_cmd(a),
        Command::SchemeCompare(a) => commands::scheme_compare_cmd(a),
        Command::VerifySchemes(a) => commands::verify_schemes(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `gendermix`: ingest name references, estimate group gender composition,
//! simulate labeled populations and benchmark the estimators.
//!
//! Exit codes: 0 on success, 2 for input or usage errors, 3 when the inputs
//! are valid but no usable names remain for an estimate.

mod commands;
mod config;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gendermix", version, about, args_override_self = true)]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// File of `key = value` lines giving default values for any flag;
    /// flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a reference table from a canonical CSV or SSA year files.
    Ingest(commands::IngestArgs),
    /// Pool several reference tables into one.
    Merge(commands::MergeArgs),
    /// Estimate the gender composition of a list of names.
    Estimate(commands::EstimateArgs),
    /// Draw a labeled synthetic population from a reference table.
    Simulate(commands::SimulateArgs),
    /// Sweep estimators over synthetic populations across compositions.
    Bench(commands::BenchArgs),
}

fn main() -> ExitCode {
    let raw: Vec<_> = std::env::args_os().collect();
    let config_file = config::named_file(&raw);
    let args = match config::expand(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let ctx = commands::Context {
        config_file,
        threads: cli.threads,
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&a, &ctx),
        Command::Merge(a) => commands::merge(&a, &ctx),
        Command::Estimate(a) => commands::estimate(&a, &ctx),
        Command::Simulate(a) => commands::simulate(&a, &ctx),
        Command::Bench(a) => commands::bench(&a, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_estimation_impossible() { 3 } else { 2 })
        }
    }
}

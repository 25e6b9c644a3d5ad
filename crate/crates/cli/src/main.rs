//! `iovpr` - command-line pipeline for inside-out visual place recognition.
//!
//! Subcommands cover the three pipeline phases plus dataset preparation:
//! `pano-cut` and `coverage-select` prepare street-view tiles, `augment` /
//! `mine` / `train` produce an embedder, `index` extracts gallery
//! embeddings offline, and `eval` / `subset` run retrieval evaluation.
//!
//! Exit codes: 1 for usage errors, 2 for missing or malformed data, 3 for
//! internal errors.

mod args;
mod commands;
mod common;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::common::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    if let Ok(threads) = std::env::var("IOVPR_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not apply IOVPR_THREADS={n}: {e}");
                }
            }
            _ => log::warn!("ignoring invalid IOVPR_THREADS={threads}"),
        }
    }

    // A panic is an internal bug, not a data problem; map it to exit 3.
    let result = std::panic::catch_unwind(|| match &cli.command {
        Command::PanoCut(a) => commands::pano::run(&cli, a),
        Command::CoverageSelect(a) => commands::coverage::run(&cli, a),
        Command::Augment(a) => commands::augment::run(&cli, a),
        Command::Mine(a) => commands::mine::run(&cli, a),
        Command::Train(a) => commands::train::run(&cli, a),
        Command::Index(a) => commands::index::run(&cli, a),
        Command::Eval(a) => commands::eval::run(&cli, a),
        Command::Subset(a) => commands::subset::run(&cli, a),
    })
    .unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(CliError::Internal(anyhow::anyhow!("panicked: {msg}")))
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("data error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}

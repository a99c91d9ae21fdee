//! `mallows`: command-line front end of the interval-data library.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 numeric failure.
//! Failures print one JSON object on stderr.

mod analysis;
mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use crate::args::Cli;
use crate::commands::Output;
use crate::config::AnalysisConfig;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage", EXIT_VALIDATION, e.render().to_string().trim()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let core = e.chain().find_map(|c| c.downcast_ref::<mallows_core::Error>());
            let (kind, code) = match core {
                Some(c) if c.is_numeric() => (c.kind(), EXIT_NUMERIC),
                Some(c) => (c.kind(), EXIT_VALIDATION),
                None => ("validation", EXIT_VALIDATION),
            };
            report(kind, code, &format!("{e:#}"))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => AnalysisConfig::load(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            anyhow::bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = Output::new(cli.out_dir.clone().or_else(|| cfg.out_dir.clone()))?;
    commands::run(cli.command, &cfg, &out)
}

fn report(kind: &str, code: u8, message: &str) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "exit_code": code, "message": message } });
    eprintln!("{body}");
    ExitCode::from(code)
}

//! Batch front end for the converter laboratory.
//!
//! `qboost validate <cfg>` checks a JSON run configuration and lists every
//! violated invariant; `qboost run <cfg>` executes the configured scenario
//! and prints the path of each emitted file. Exit codes: 0 success, 1
//! validation failure, 2 numerical failure (diverged or unstable).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qboost_cli::{config, scenarios, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "qboost", version, about = "Converter modeling laboratory front end")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a configuration file; prints "ok" or one error per line.
    Validate { config: PathBuf },
    /// Execute the configured scenario; prints each output file written.
    Run { config: PathBuf },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Validate { config } => validate_cmd(&config),
        Cmd::Run { config } => run_cmd(&config),
    }
}

fn load(path: &Path) -> Result<config::Validated, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("{}: {e}", path.display())])?;
    let cfg = config::parse(&text).map_err(|e| vec![e])?;
    config::validate(&cfg)
}

fn validate_cmd(path: &Path) -> ExitCode {
    match load(path) {
        Ok(_) => {
            println!("ok");
            ExitCode::SUCCESS
        }
        Err(errs) => {
            for e in errs {
                println!("error: {e}");
            }
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn run_cmd(path: &Path) -> ExitCode {
    let validated = match load(path) {
        Ok(v) => v,
        Err(errs) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let out_root = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(&validated.out_dir));
    match scenarios::run(&validated, &out_root) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

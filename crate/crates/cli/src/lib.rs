//! The `dpd` command-line front end.
//!
//! Exit codes: 0 success, 1 an experiment verdict failed or the run itself
//! failed, 2 configuration or usage error, 3 IO error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::{execute, Cli, CliError, Command, Outcome, WORKERS_ENV};
pub use config::{parse_config, ConfigError, RunConfig};

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Summaries go to stdout, errors to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let env_workers = std::env::var(WORKERS_ENV).ok();
    match execute(cli.command, env_workers.as_deref()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("dpd: {e}");
            e.exit_code()
        }
    }
}

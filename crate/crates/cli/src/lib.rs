//! Command-line front end: CSV in, JSON reports and CSV tables out.
//!
//! Exit codes: 0 on success, 2 for usage errors and unparseable input, 3
//! when a column or the response has zero scale, 1 for any other failure.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;

pub use args::Cli;
pub use error::{CliError, Result};

pub fn run(cli: Cli) -> Result<()> {
    commands::run(cli.command)
}

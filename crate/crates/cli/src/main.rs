use std::process::ExitCode;

use clap::Parser;
use mip_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match mip_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

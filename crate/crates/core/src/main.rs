use std::process::ExitCode;

use clap::Parser;
use rmnp_core::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match cli::run(args) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::error_code(&e) as u8)
        }
    }
}

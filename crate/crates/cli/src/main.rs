use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match advsum_cli::run(advsum_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

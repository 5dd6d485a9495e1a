//! `hsj`: command-line front end.
//!
//! Exit codes: 0 success (or target unreachable, or analysis verdict
//! positive), 1 a witness was found or a property is violated, 2 usage
//! or compile errors, 3 the verifier ran out of its node budget.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("hsj: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use psi_cli::{run, Cli, Outcome};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done | Outcome::Skipped) => ExitCode::SUCCESS,
        Ok(Outcome::ItemFailures(n)) => {
            eprintln!("{n} item(s) failed; see the *_errors.jsonl files");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

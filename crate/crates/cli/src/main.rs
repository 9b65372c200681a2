mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(n) => decurtain_core::par::with_threads(n, || commands::run(&cli)),
        None => commands::run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decurtain: error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

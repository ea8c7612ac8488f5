use std::process::ExitCode;

use clap::Parser;
use contint_cli::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.into_config().and_then(|cfg| contint_cli::run_config(&cfg)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use ldh_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match ldh_cli::run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

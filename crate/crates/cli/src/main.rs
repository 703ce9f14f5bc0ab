use std::process::ExitCode;

use clap::Parser;
use gradsr_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gradsr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

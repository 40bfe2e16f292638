//! `opuc`: lemma tables, the multi-stage construction, verification, the
//! real-line transfer and entropy tables, written as CSV.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{merge_config, Cli, Command};
use error::{CliError, CliResult};

fn run(cli: &Cli) -> CliResult<()> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Lemma(a) => commands::lemma(g, a),
        Command::Construct(a) => commands::construct(g, a),
        Command::Verify(a) => commands::verify(g, a),
        Command::Realline(a) => commands::realline(g, a),
        Command::EntropyTable(a) => commands::entropy_table(g, a),
        Command::Calibrate => commands::calibrate(g),
    }
}

fn main() -> ExitCode {
    let argv = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

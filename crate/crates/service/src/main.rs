use std::process::ExitCode;

use clap::Parser;
use threadtrace_service::cli::{run, Cli};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_max_level(tracing::Level::INFO)
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("threadtrace: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

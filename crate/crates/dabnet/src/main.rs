use std::process::ExitCode;

use clap::Parser;
use dabnet::cli::{run, Cli, Status};

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("DAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("DAB_THREADS must be a non-negative integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("dabnet: {msg}");
        return ExitCode::from(2);
    }
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::ChecksFailed) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("dabnet: {e}");
            ExitCode::FAILURE
        }
    }
}

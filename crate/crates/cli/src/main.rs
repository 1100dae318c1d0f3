use std::process::ExitCode;

use clap::Parser;
use sparsact_cli::args::Cli;
use sparsact_cli::{run, CliError};

const LOG_ENV: &str = "SPARSACT_LOG";

fn init_logging() -> Result<(), CliError> {
    let level = std::env::var(LOG_ENV).unwrap_or_else(|_| "info".into());
    let filter = match level.trim().to_ascii_lowercase().as_str() {
        "error" => log::LevelFilter::Error,
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        other => return Err(CliError::input(format!("{LOG_ENV} must be error, info or debug, got `{other}`"))),
    };
    env_logger::Builder::new().filter_level(filter).format_timestamp(None).init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = init_logging().and_then(|()| run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sparsact: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

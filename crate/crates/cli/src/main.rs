use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

use qsdc_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match execute(&cli) {
        Ok(()) => ExitCode::from(qsdc_cli::EXIT_OK),
        Err(e) => {
            eprintln!("qsdc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

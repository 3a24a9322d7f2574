//! `stefan`: command-line driver for the free-boundary logistic solvers.

mod args;
mod commands;
mod error;
mod output;
mod selftest;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::EXIT_USAGE;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STEFAN_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    if let Err(e) = commands::execute(&cli.command, None, argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

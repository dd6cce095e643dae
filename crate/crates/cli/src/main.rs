mod args;
mod commands;
mod config;
mod error;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use error::{CliError, EXIT_VALIDATION};

fn run() -> Result<(), CliError> {
    let argv = config::merge_config(&Cli::command(), std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.print()?;
            return Ok(());
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(EXIT_VALIDATION);
        }
    };
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Gen(a) => commands::gen(&a, &mut out),
        Command::BuildDict(a) => commands::build_dict(&a, &mut out),
        Command::Analyze(a) => commands::analyze(&a, &mut out),
        Command::Simulate(a) => commands::simulate(&a, &mut out),
        Command::Train(a) => commands::train(&a, &mut out),
        Command::Eval(a) => commands::eval(&a, &mut out),
        Command::Bench(a) => commands::bench(&a, &mut out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hhash: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

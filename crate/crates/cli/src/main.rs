mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use chansim_core::ErrorClass;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Core(chansim_core::Error),
    Usage(String),
    /// Some inputs of a batch failed; the rest were written.
    Partial(usize),
    /// Gradient check found this many mismatches.
    Check(usize),
}

impl From<chansim_core::Error> for CliError {
    fn from(e: chansim_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Partial(n) => write!(f, "{n} input(s) failed"),
            CliError::Check(n) => write!(f, "gradient check failed on {n} parameter(s)"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Partial(_) => EXIT_DATA,
            CliError::Check(_) => EXIT_NUMERICAL,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Augment(a) => commands::augment(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::CheckGrad(a) => commands::check_grad(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

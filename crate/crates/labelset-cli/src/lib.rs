//! Library side of the `labelset` command-line tool; the binary is a thin
//! wrapper around [`run`] so integration tests and fuzzing can drive the
//! same code paths.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

/// Parse and execute an argv; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    // clap handles --help/--version and flag validation; its exit code for
    // usage errors is 2, matching the validation-error convention here.
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.code
        }
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Calibrate(args) => commands::cmd_calibrate(args),
        Command::Predict(args) => commands::cmd_predict(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::Oracle(args) => commands::cmd_oracle(args),
        Command::Rerun(args) => {
            let config = commands::load_run_config(&args.config)?;
            let argv = config.to_argv();
            let cli = Cli::try_parse_from(&argv).map_err(|e| {
                CliError::data(format!("recorded run config does not parse: {e}"))
            })?;
            if matches!(cli.command, Command::Rerun(_)) {
                return Err(CliError::validation("refusing to rerun a rerun"));
            }
            dispatch(&cli.command)
        }
    }
}

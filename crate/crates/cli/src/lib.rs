//! Command-line front end: subcommand parsing, configuration resolution,
//! report and image output.
//!
//! Exit codes are listed in [`error::exit`].

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod image;

use args::{Cli, Command};
use error::CliError;

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = config::load_file_config(cli.global.config.as_deref())?;
    let globals = config::resolve_globals(&cli.global, &file)?;
    match &cli.command {
        Command::Extract(a) => commands::extract(a, &globals, &file),
        Command::Train(a) => commands::train_cmd(a, &globals, &file),
        Command::Evaluate(a) => commands::evaluate(a, &globals, &file),
        Command::Crossval(a) => commands::crossval(a, &globals, &file),
        Command::Predict(a) => commands::predict(a, &globals, &file),
        Command::Cluster(a) => commands::cluster(a, &globals, &file),
        Command::Spectrogram(a) => commands::spectrogram(a, &globals, &file),
    }
}

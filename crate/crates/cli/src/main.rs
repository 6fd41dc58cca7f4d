use std::process::ExitCode;

use clap::Parser;

use timbre_cli::args::Cli;
use timbre_cli::error::exit;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    // a broken config file is reported by `run`; here it only falls back to quiet logging
    let file_verbose = timbre_cli::config::load_file_config(cli.global.config.as_deref())
        .ok()
        .and_then(|f| f.verbose)
        .unwrap_or(false);
    let level = if cli.global.verbose || file_verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match timbre_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

//! `fri-sr` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or file format, 4 geometry,
//! 5 solver divergence, 1 anything else.

mod args;
mod commands;
mod config;
mod error;
mod manifest;
mod source;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;
use error::CliError;

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let command_line: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let expanded = config::expand(argv)?;
    let cli = Cli::try_parse_from(expanded).unwrap_or_else(|e| e.exit());

    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).parse_default_env().init();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }

    let ctx = Context {
        command_line,
        config: serde_json::to_value(&cli).map_err(|e| CliError::Internal(e.to_string()))?,
        seed: cli.seed,
        manifest_dir: cli.manifest_dir.clone(),
    };
    match &cli.command {
        Command::Acquire(a) => commands::acquire(&ctx, a),
        Command::Mask(a) => commands::mask(&ctx, a),
        Command::Recon(a) => commands::recon(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
    }
}

fn main() {
    let code = match run(std::env::args_os().collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fri-sr: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

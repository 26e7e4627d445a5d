use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use bridge_bench::cli::Cli;
use bridge_bench::experiments;

fn run() -> Result<()> {
    let cli = Cli::parse();
    let (config, format, out) = cli.command.resolve()?;
    let text = experiments::run(&config)?.render(format)?;
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bridge-bench: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use crate::config::{Cli, Command};

const EXIT_PARAMETER: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_PARAMETER)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<matryoshka::Error>() {
        Some(core) if core.is_parameter_error() => EXIT_PARAMETER,
        Some(_) => EXIT_NUMERICAL,
        None => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config::worker_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let (cfg, rendered) = pool.install(|| match &cli.command {
        Command::Lattice(args) => commands::lattice(args),
        Command::Spectrum(args) => commands::spectrum(args),
        Command::Sdrg(args) => commands::sdrg(args),
        Command::Entropy(args) => commands::entropy(args),
    })?;
    for w in &rendered.warnings {
        eprintln!("warning: {w}");
    }
    output::emit(cfg.out.as_deref(), &rendered.bytes)
}

mod args;
mod commands;
mod error;
mod options;
mod rundir;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;

use args::{Cli, Command};
use error::{invalid, CliError};
use options::load_config;

fn base<T: DeserializeOwned + Default>(config: Option<&Path>, command: &str) -> Result<T, CliError> {
    match config {
        Some(p) => load_config(p, command),
        None => Ok(T::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let name = cli.command.name();
    let cfg = cli.config.as_deref();
    let out = cli.run_dir.as_deref();
    match cli.command {
        Command::Ingest(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::ingest(o, out)
        }
        Command::Stats(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::stats(o, out)
        }
        Command::Split(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::split(o, out)
        }
        Command::Candidates(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::candidates(o, out)
        }
        Command::Context(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::context(o, out)
        }
        Command::Train(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::train(o, out)
        }
        Command::Evaluate(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::evaluate(o, out)
        }
        Command::EnsembleInit(a) => {
            let mut o = base(cfg, name)?;
            a.apply(&mut o);
            commands::ensemble(o, out)
        }
        Command::Report(a) => {
            let mut o: options::ReportOptions = base(cfg, name)?;
            a.apply(&mut o);
            if o.inputs.is_empty() {
                return Err(invalid("give at least one --input results.json"));
            }
            commands::report(o, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&msg).trim_start_matches("error: ");
            eprintln!("ctxdrop: invalid input: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let text = e.to_string();
            let line: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            eprintln!("ctxdrop: {}", line.join(" "));
            ExitCode::from(e.exit_code())
        }
    }
}

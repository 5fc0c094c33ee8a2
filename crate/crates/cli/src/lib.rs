//! Command-line front end: argument parsing, artifact writing and plots.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod plot;

use anyhow::Result;

use args::{Cli, Command};
use commands::{Ctx, Exit};

/// Runs one parsed invocation and returns its exit status. Errors raised
/// after the output directory exists are still written to `report.txt`.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<Exit> {
    let name = match &cli.command {
        Command::Solve(_) => "solve",
        Command::Barriers(_) => "barriers",
        Command::Fixpoint(_) => "fixpoint",
        Command::Validate(_) => "validate",
        Command::Sweep(_) => "sweep",
    };
    let out = cli.common.out.clone();
    let mut ctx = Ctx::new(cli.common, &out)?;
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(&mut ctx, a),
        Command::Barriers(a) => commands::barriers(&mut ctx, a),
        Command::Fixpoint(a) => commands::fixpoint(&mut ctx, a),
        Command::Validate(a) => commands::validate(&mut ctx, a),
        Command::Sweep(a) => commands::sweep(&mut ctx, a),
    };
    let (exit, err) = match result {
        Ok(e) => (e, None),
        Err(e) => {
            ctx.kv("error", format!("{e:#}"));
            (Exit::for_error(&e), Some(e))
        }
    };
    commands::finish(ctx, name, &argv, exit)?;
    match err {
        Some(e) => Err(e),
        None => Ok(exit),
    }
}

//! `vigilkit`: scoring, feature extraction, relevance analysis and figures
//! from the command line. Exit status is 2 for usage errors and 1 for any
//! failure, in which case nothing is left in the output directory.

mod args;
mod commands;
mod output;
mod table;

use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use commands::RunContext;
use output::Staging;

fn run(cli: &Cli, argv: &[String]) -> anyhow::Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let started = Instant::now();
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut stage = Staging::new(&cli.global.out)?;
    let mut ctx = RunContext::default();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Score(a) => commands::score(a, &mut stage, &mut ctx),
        Command::Extract(a) => commands::extract(a, g, &mut stage, &mut ctx),
        Command::Screen(a) => commands::screen(a, g, &mut stage, &mut ctx),
        Command::Mvpa(a) => commands::mvpa(a, g, &mut stage, &mut ctx),
        Command::NnTrain(a) => commands::nn_train(a, g, &mut stage, &mut ctx),
        Command::Synth(a) => commands::synth(a, g, &mut stage, &mut ctx),
        Command::Report(a) => commands::report(a, g, &mut stage, &mut ctx),
    };
    if let Err(e) = result {
        stage.abandon();
        return Err(e);
    }
    for w in &ctx.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = json!({
        "schema": "vigilkit-run/1",
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "argv": argv,
        "config": cli,
        "seed": g.seed,
        "paper_compat": g.paper_compat,
        "threads": g.threads,
        "inputs": ctx.inputs,
        "outputs": stage.files(),
        "warnings": ctx.warnings,
        "summary": ctx.summary,
        "started_unix_s": unix,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let written = serde_json::to_string_pretty(&manifest)?;
    if let Err(e) = stage.write("manifest.json", written) {
        stage.abandon();
        return Err(e);
    }
    stage.commit()?;
    Ok(())
}

fn main() -> ExitCode {
    let argv = match args::merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

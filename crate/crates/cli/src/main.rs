//! `snakelab <experiment> --config path.json [--seed N] [--replicas K] [--out dir]`
//!
//! Exit codes: 0 success, 1 invalid config, 2 runtime failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Experiment, Overrides};

#[derive(Parser)]
#[command(name = "snakelab", version, about = "Experiments on ψ-super-Brownian motion, Lévy trees and snakes")]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let ov = Overrides { seed: cli.seed, replicas: cli.replicas, out: cli.out };
    let validated = config::parse(&text).and_then(|cfg| config::validate(cli.experiment, &cfg, &ov));
    let cfg = match validated {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("error: {e}");
            }
            return ExitCode::from(1);
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    match run::run(&cfg) {
        Ok(m) => {
            println!("{}: wrote {} files to {}", m.experiment, m.outputs.len() + 1, cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("runtime error: {}", e.0);
            ExitCode::from(2)
        }
    }
}

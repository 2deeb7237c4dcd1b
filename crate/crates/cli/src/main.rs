//! `nls-jitter`: batch runner for soliton timing-jitter experiments.
//!
//! Exit codes: 0 ok, 1 configuration or contract error, 2 numerical or I/O
//! failure, 3 verdict failure under `--strict`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "nls-jitter", version, about = "Stochastic NLS soliton jitter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration file.
    config: PathBuf,
    /// Output directory; overrides `output.dir` and `NLSJ_OUTPUT_DIR`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Exit with status 3 when a verdict fails.
    #[arg(long)]
    strict: bool,
    /// Also write a gnuplot script next to the CSV output.
    #[arg(long)]
    gnuplot_script: bool,
    /// Run ensembles on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One trajectory and its observable CSV.
    Simulate(Common),
    /// Closed-form fields and solver-versus-oracle error table.
    Oracle(Common),
    /// Closed-form tail-rate bounds as JSON.
    Bounds(Common),
    /// Control realisation and energy-inequality verdict.
    Controls(Common),
    /// Tail-rate curve and comparison with the bounds.
    Tails(Common),
}

pub enum Failure {
    Validation(String),
    Numerical(String),
    Verdict(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<nls_jitter::Error> for Failure {
    fn from(e: nls_jitter::Error) -> Self {
        use nls_jitter::Error as E;
        match e {
            E::Config(_) | E::Contract(_) | E::OutOfRange(_) | E::MissingNorm(_) | E::ScenarioMismatch(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o error: {e}"))
    }
}

fn output_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(d) = &common.out {
        return d.clone();
    }
    if let Some(d) = &cfg.output.dir {
        return PathBuf::from(d);
    }
    std::env::var_os("NLSJ_OUTPUT_DIR").map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, which) = match &cli.command {
        Command::Simulate(c) => (c, "simulate"),
        Command::Oracle(c) => (c, "oracle"),
        Command::Bounds(c) => (c, "bounds"),
        Command::Controls(c) => (c, "controls"),
        Command::Tails(c) => (c, "tails"),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let sink = output::Sink::new(
        output_dir(common, &cfg),
        cfg.output.prefix.clone(),
        &text,
        cfg.noise.seed,
    )?;
    let ctx = commands::Context {
        cfg: &cfg,
        sink: &sink,
        common,
    };
    let passed = match which {
        "simulate" => commands::simulate(&ctx)?,
        "oracle" => commands::oracle(&ctx)?,
        "bounds" => commands::bounds(&ctx)?,
        "controls" => commands::controls(&ctx)?,
        _ => commands::tails(&ctx)?,
    };
    if !passed && common.strict {
        return Err(Failure::Verdict(format!("{which}: verdict failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verdict(m)) => {
            eprintln!("{m}");
            ExitCode::from(3)
        }
    }
}

//! Experiment CLI: thin dispatch over the library's experiment harness.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on numerical
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssi_lab::harness::{run_experiment, ExperimentSpec, OutputFormat};

#[derive(Parser)]
#[command(
    name = "ssi-lab",
    about = "Sequence single-index laboratory: SGD dynamics, Hermite analysis, loss landscapes and phase diagrams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML); its `kind` must match the subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for records and tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep pool (0 = automatic).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output format override: csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Hermite coefficients and the sequence information exponent of a target.
    Sie(Common),
    /// Sample the population loss over the sufficient-statistic ball.
    Landscape(Common),
    /// Replicated one-pass SGD runs with persisted trajectories.
    SgdRun(Common),
    /// Tied-vs-untied weak-recovery gain across sequence lengths.
    Gain(Common),
    /// Positional/semantic phase experiment: classifier plus SGD probabilities.
    Phase(Common),
    /// Sufficient-statistics flow: hitting times across dimensions.
    Ode(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Sie(c) => ("sie", c),
            Command::Landscape(c) => ("landscape", c),
            Command::SgdRun(c) => ("sgd-run", c),
            Command::Gain(c) => ("gain", c),
            Command::Phase(c) => ("phase", c),
            Command::Ode(c) => ("ode", c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = cli.command.parts();

    // configuration stage: any failure here is exit code 1
    let mut spec = match load_spec(kind, common) {
        Ok(spec) => spec,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = common.seed {
        spec.set_base_seed(seed);
    }

    match run_experiment(&spec, &common.out, common.workers) {
        Ok(output) => {
            for (key, value) in &output.summary {
                println!("{key}: {value}");
            }
            for warning in &output.warnings {
                eprintln!("warning: {warning}");
            }
            for file in &output.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("numerical failure: {err}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(kind: &str, common: &Common) -> ssi_lab::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::load(&common.config)?;
    if spec.kind_name() != kind {
        return Err(ssi_lab::Error::Config(format!(
            "config kind '{}' does not match subcommand '{kind}'",
            spec.kind_name()
        )));
    }
    if let Some(fmt) = &common.format {
        spec.set_format(fmt.parse::<OutputFormat>()?);
    }
    Ok(spec)
}

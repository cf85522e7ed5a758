use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use lwf_core::config::ModelConfig;
use lwf_core::forward::DEFAULT_DT;
use lwf_core::{Coefficients, Model};

mod commands;
mod record;

use record::RunRecord;

/// Simulate and cross-check two-type Lambda-Wright-Fisher processes and their
/// Bernstein coefficient dual.
#[derive(Debug, Parser)]
#[command(name = "lwf", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Model file (`.json` or `.toml`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[arg(long, global = true, default_value_t = 10_000)]
    replicas: usize,

    /// Time horizon; for `fixation` the averaging window of the dual.
    #[arg(long, global = true)]
    t: Option<f64>,

    /// Starting frequency of the forward process.
    #[arg(long, global = true)]
    x0: Option<f64>,

    #[arg(long, global = true, default_value_t = DEFAULT_DT)]
    dt: f64,

    /// Coefficient vector, comma separated, e.g. `0,0.5,1`.
    #[arg(long, global = true)]
    v: Option<String>,

    #[arg(long, global = true)]
    n_max: Option<usize>,

    /// Population size for `moran`.
    #[arg(long, global = true, default_value_t = 100)]
    population: usize,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Run `fixation`, `moments` and `recursion` even when the recurrence condition fails.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Validate the model, report the recurrence condition and the Lyapunov table.
    Check,
    /// Forward paths from `--x0` up to `--t`.
    SimulateForward,
    /// Dual paths from `--v` up to `--t`.
    SimulateDual,
    /// Moran chain against the diffusion.
    Moran,
    /// Monte Carlo duality gaps and the generator identity.
    Duality,
    /// Fixation probabilities from the dual, cross-checked forward.
    Fixation,
    /// Stationary moments and the absorbed-value expansion.
    Moments,
    /// Residuals of the moment recursion.
    Recursion,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::SimulateForward => "simulate-forward",
            Command::SimulateDual => "simulate-dual",
            Command::Moran => "moran",
            Command::Duality => "duality",
            Command::Fixation => "fixation",
            Command::Moments => "moments",
            Command::Recursion => "recursion",
        }
    }
}

impl Cli {
    pub fn vector(&self) -> anyhow::Result<Option<Coefficients>> {
        let Some(text) = &self.v else { return Ok(None) };
        let entries = text
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("--v entry `{s}`")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(Some(Coefficients::new(entries)?))
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.replicas == 0 {
            bail!("--replicas must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bail!("--dt must be positive");
        }
        if let Some(x) = self.x0 {
            if !(0.0..=1.0).contains(&x) {
                bail!("--x0 must lie in [0, 1]");
            }
        }
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                bail!("--t must be a nonnegative number");
            }
        }
        Ok(())
    }
}

fn load(cli: &Cli) -> anyhow::Result<(ModelConfig, Model)> {
    let Some(path) = &cli.config else {
        bail!("--config is required");
    };
    let config = ModelConfig::load(path)?;
    let model = config.to_model()?;
    Ok((ModelConfig::from_model(&model), model))
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    cli.validate()?;
    let (config, model) = load(cli)?;
    let output = commands::run(cli.command, cli, &model)?;
    let record = RunRecord::new(cli, config, &model, output)?;
    record.write(cli.format, cli.out.as_deref())?;
    Ok(record.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_flag_parses() {
        let cli = Cli::try_parse_from(["lwf", "duality", "--v", "0, 0.5,1"]).unwrap();
        assert_eq!(cli.vector().unwrap().unwrap().entries(), &[0.0, 0.5, 1.0]);
        let cli = Cli::try_parse_from(["lwf", "duality", "--v", "0,x"]).unwrap();
        assert!(cli.vector().is_err());
        assert!(Cli::try_parse_from(["lwf", "duality", "--format", "xml"]).is_err());
    }
}

//! Command-line front-end: config resolution, the design / spectrum /
//! simulate / sweep pipelines and their CSV and JSON output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Format, GatingName, ModelName, Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "etdf", version, about = "Impulse-gain ETDF stabilisation of periodic orbits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign gains and report controllability and the achieved spectrum.
    Design,
    /// Floquet multipliers by the characteristic function, operator and asymptotics.
    Spectrum,
    /// Nonlinear closed-loop run from a perturbed orbit.
    Simulate,
    /// Gains and stability over a grid in p, epsilon and delta.
    Sweep,
    /// Run the acceptance suite.
    Verify,
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p: Option<f64>,
    /// Comma-separated complex targets, e.g. `0+0.5i,0-0.5i`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub targets: Option<String>,
    /// Comma-separated gains; skips the assignment.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gains: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub gating: Option<GatingName>,
    /// Operator mesh size.
    #[arg(long, global = true)]
    pub mesh: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            model: self.model,
            p: self.p,
            targets: self.targets.clone(),
            gains: self.gains.clone(),
            epsilon: self.epsilon,
            delta: self.delta,
            rho: self.rho,
            gating: self.gating,
            mesh: self.mesh,
            out: self.out.clone(),
            format: self.format,
        }
    }

    /// File values, then flags on top, then validation.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Design => commands::cmd_design(&cfg),
        Command::Spectrum => commands::cmd_spectrum(&cfg),
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Verify => commands::cmd_verify(&cfg),
    }
}

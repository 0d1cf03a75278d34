//! Command-line front end.
//!
//! ```text
//! phasemix chart|evolve|decay|validate [--config <path>] [--out <dir>] [--set key=value]...
//! ```
//!
//! Exit codes: `0` success, `1` failed invariant in `validate`, `2` bad
//! configuration, `3` convergence, cross-validation or fit failure, `4` I/O.

pub mod checks;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
    #[error("{failed} of {total} checks failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ValidationFailed { .. } => 1,
            Self::Config(_) => 2,
            Self::Convergence(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "phasemix", version, about = "Phase mixing in a quartic confining potential")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON experiment configuration; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set epsilon=0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelfTest {
    /// Exact `t⁻²` series.
    PowerLaw,
    /// `(2 + sin t)/t`, recovered through the envelope.
    Oscillating,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate c(K) and c'(K) over the chart.
    Chart(CommonArgs),
    /// Write moment snapshots on the spatial grid.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
        /// Cross-check the chart solution against backward characteristics.
        #[arg(long)]
        validate: bool,
    },
    /// Measure and fit the decay of sup |d_t phi|.
    Decay {
        #[command(flatten)]
        common: CommonArgs,
        /// Run the fit on a synthetic series instead of a simulation.
        #[arg(long, value_enum)]
        self_test: Option<SelfTest>,
    },
    /// Run the invariant checks.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Print the check names without running them.
        #[arg(long)]
        list: bool,
    },
}

impl CommonArgs {
    pub fn load(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut overrides = self.overrides.clone();
        if let Some(out) = &self.out {
            let out = serde_json::to_string(&out.display().to_string()).expect("path string");
            overrides.push(format!("output_dir={out}"));
        }
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides),
            None => ExperimentConfig::from_json("{}", &overrides),
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Chart(common) => {
            let cfg = common.load()?;
            let summary = commands::cmd_chart(&cfg)?;
            println!(
                "chart: {} nodes, min c' = {:.6e}, written to {}",
                summary.n_k,
                summary.min_c_prime,
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::Evolve { common, validate } => {
            let cfg = common.load()?;
            let rows = commands::cmd_evolve(&cfg, validate)?;
            println!("evolve: {rows} rows written to {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Decay { common, self_test } => {
            let cfg = common.load()?;
            match self_test {
                Some(mode) => {
                    let out = commands::cmd_self_test(&cfg, mode)?;
                    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
                }
                None => {
                    let out = commands::cmd_decay(&cfg)?;
                    println!(
                        "decay: slope {:.4}, residual {:.4}, decays {}",
                        out.slope, out.residual, out.decays
                    );
                }
            }
            Ok(())
        }
        Command::Validate { common, list } => {
            if list {
                for def in checks::CHECKS {
                    println!("{:<32} {}", def.name, def.description);
                }
                return Ok(());
            }
            let cfg = common.load()?;
            let report = commands::cmd_validate(&cfg)?;
            for c in &report.checks {
                println!(
                    "{} {:<32} measured {:.3e} tolerance {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance
                );
            }
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::ValidationFailed {
                    failed,
                    total: report.checks.len(),
                });
            }
            Ok(())
        }
    }
}

//! The `ppoisson` command line: every pipeline reads an [`ExperimentConfig`]
//! (JSON file and/or flags) and writes CSV and JSON files into its output
//! directory.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{read_source_csv, ExperimentConfig, Grids, SourceSpec};
pub use output::{write_atomic, Cell, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICS: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerics(String),
    #[error("{0}")]
    Io(String),
}

/// Summary of a finished pipeline and the checks it failed, if any.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: serde_json::Value,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_NUMERICS
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerics(_) => EXIT_NUMERICS,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::InvalidParameter { .. } | E::InvalidInput(_) | E::RegimeMismatch { .. } | E::EmptyPairs => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerics(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ppoisson", version, about = "Radial p-Poisson experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate (n, p, q) and print the derived exponents.
    Context(Overrides),
    /// Solve for the configured source; writes solution.csv and residual.json.
    Solve(Overrides),
    /// Distribution function and norms of the solution; writes distribution.csv and norms.csv.
    Analyze(Overrides),
    /// Distribution-function recursion; writes iteration_kNN.csv and summary.json.
    Iterate(Overrides),
    /// Exponent sweep over the power-law family; writes sweep.csv and verdict.json.
    Sharpness(Overrides),
    /// Runs every pipeline and collects the summaries in report.json.
    Report(Overrides),
}

/// Flags override the JSON config field by field.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short = 'n', long = "dim")]
    pub n: Option<u32>,
    #[arg(short = 'p')]
    pub p: Option<f64>,
    #[arg(short = 'q')]
    pub q: Option<f64>,
    /// Constant source value.
    #[arg(long, conflicts_with_all = ["source_power", "source_file"])]
    pub source_constant: Option<f64>,
    /// Power source `coefficient,exponent`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "source_file")]
    pub source_power: Option<Vec<f64>>,
    /// Sampled source as CSV with columns r,f.
    #[arg(long)]
    pub source_file: Option<PathBuf>,
    #[arg(long)]
    pub r_nodes: Option<usize>,
    #[arg(long)]
    pub beta_nodes: Option<usize>,
    #[arg(long)]
    pub height_nodes: Option<usize>,
    #[arg(short = 'o', long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub residual_bound: Option<f64>,
    /// Norm exponents for `analyze`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r_exps: Option<Vec<f64>>,
    /// Iteration count K.
    #[arg(short = 'k', long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Exponents probed by `sharpness`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r_grid: Option<Vec<f64>>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.context.n = n;
        }
        if let Some(p) = self.p {
            cfg.context.p = p;
        }
        if let Some(q) = self.q {
            cfg.context.q = q;
        }
        if let Some(v) = self.source_constant {
            cfg.source = SourceSpec::Constant(v);
        }
        if let Some(v) = &self.source_power {
            if v.len() != 2 {
                return Err(CliError::Validation(format!(
                    "--source-power takes `coefficient,exponent`, got {} values",
                    v.len()
                )));
            }
            cfg.source = SourceSpec::Power {
                coefficient: v[0],
                exponent: v[1],
            };
        }
        if let Some(path) = &self.source_file {
            cfg.source = SourceSpec::File(path.clone());
        }
        if let Some(v) = self.r_nodes {
            cfg.grids.r_nodes = v;
        }
        if let Some(v) = self.beta_nodes {
            cfg.grids.beta_nodes = v;
        }
        if let Some(v) = self.height_nodes {
            cfg.grids.height_nodes = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.residual_bound {
            cfg.residual_bound = v;
        }
        if let Some(v) = &self.r_exps {
            cfg.r_exps = v.clone();
        }
        if let Some(v) = self.iterations {
            cfg.iterations = Some(v);
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = &self.r_grid {
            cfg.r_grid = v.clone();
        }
        Ok(cfg)
    }
}

/// Runs one subcommand, printing its JSON summary on stdout.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let (overrides, run): (&Overrides, fn(&ExperimentConfig) -> Result<Outcome, CliError>) =
        match &cli.command {
            Command::Context(o) => (o, commands::context),
            Command::Solve(o) => (o, commands::solve),
            Command::Analyze(o) => (o, commands::analyze),
            Command::Iterate(o) => (o, commands::iterate),
            Command::Sharpness(o) => (o, commands::sharpness),
            Command::Report(o) => (o, commands::report),
        };
    let cfg = overrides.resolve()?;
    run(&cfg)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
            for f in &outcome.failures {
                eprintln!("check failed: {f}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

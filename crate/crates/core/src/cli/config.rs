use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::exponents::{ContextParams, ExponentContext};
use crate::profile::{RadialProfile, MIN_SAMPLED_NODES};
use crate::quadrature::QuadratureConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Power { coefficient: f64, exponent: f64 },
    Constant(f64),
    /// CSV with columns `r,f`; `#` lines are comments.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub r_nodes: usize,
    pub beta_nodes: usize,
    pub height_nodes: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            r_nodes: 512,
            beta_nodes: 200,
            height_nodes: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub context: ContextParams,
    pub source: SourceSpec,
    pub quadrature: QuadratureConfig,
    pub grids: Grids,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Largest acceptable relative p-Laplacian residual of a solution.
    pub residual_bound: f64,
    pub r_exps: Vec<f64>,
    pub iterations: Option<usize>,
    pub epsilon: f64,
    pub r_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            context: ContextParams { n: 3, p: 2.0, q: 1.2 },
            source: SourceSpec::Constant(1.0),
            quadrature: QuadratureConfig::default(),
            grids: Grids::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            residual_bound: 1e-4,
            r_exps: vec![1.0, 2.0, 5.0],
            iterations: None,
            epsilon: 1.0,
            r_grid: vec![5.0, 6.0, 6.5, 6.9, 7.0, 7.5],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<ExponentContext, CliError> {
        let ctx = ExponentContext::new(self.context.n, self.context.p, self.context.q)?;
        self.quadrature.validate()?;
        let g = &self.grids;
        for (name, v) in [
            ("r_nodes", g.r_nodes),
            ("beta_nodes", g.beta_nodes),
            ("height_nodes", g.height_nodes),
        ] {
            if v < MIN_SAMPLED_NODES {
                return Err(CliError::Validation(format!(
                    "grids.{name} = {v}: at least {MIN_SAMPLED_NODES} nodes required"
                )));
            }
        }
        if !(self.residual_bound > 0.0) {
            return Err(CliError::Validation("residual_bound must be positive".into()));
        }
        if let Some(r) = self.r_exps.iter().find(|r| !(**r >= 1.0 && r.is_finite())) {
            return Err(CliError::Validation(format!("r_exp {r} must be finite and >= 1")));
        }
        if let Some(k) = self.iterations {
            if k > crate::iteration::MAX_ITERATIONS {
                return Err(CliError::Validation(format!("iterations = {k}: at most 60")));
            }
        }
        Ok(ctx)
    }

    pub fn source_profile(&self) -> Result<RadialProfile, CliError> {
        match &self.source {
            SourceSpec::Power { coefficient, exponent } => Ok(RadialProfile::power(*coefficient, *exponent)),
            SourceSpec::Constant(v) => Ok(RadialProfile::constant(*v)),
            SourceSpec::File(path) => read_source_csv(path),
        }
    }
}

/// Reads `r,f` rows into a sampled profile; malformed rows are reported with
/// their line number.
pub fn read_source_csv(path: &Path) -> Result<RadialProfile, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Io(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize| -> Result<f64, CliError> {
            let field = record.get(i).unwrap_or("");
            field.parse::<f64>().map_err(|_| {
                CliError::Io(format!(
                    "{}: line {line}: expected a number in column {}, got {field:?}",
                    path.display(),
                    i + 1
                ))
            })
        };
        if record.len() != 2 {
            return Err(CliError::Io(format!(
                "{}: line {line}: expected 2 columns, got {}",
                path.display(),
                record.len()
            )));
        }
        radii.push(parse(0)?);
        values.push(parse(1)?);
    }
    RadialProfile::sampled(radii, values, None)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

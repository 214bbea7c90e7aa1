//! Run configuration: JSON schema, validation, and construction of the
//! core inference objects.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use softcon_core::constraints::{synthetic_log_equality, ConstraintSet};
use softcon_core::exact::{DataSpec, PriorSpec};
use softcon_core::model::{ObservationOperator, SyntheticModel};
use softcon_core::stats::{GaussianSpec, Matrix, Vector};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Enkf,
}

/// Mean vector plus covariance matrix, as nested JSON arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianConfig {
    pub fn to_spec(&self) -> Result<GaussianSpec<f64>, CliError> {
        let rows: Vec<Vec<f64>> = self.cov.clone();
        let cov = if rows.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            let w = rows[0].len();
            if rows.iter().any(|r| r.len() != w) {
                return Err(CliError::Config("covariance rows have unequal lengths".into()));
            }
            Matrix::from_rows(&rows)
        };
        GaussianSpec::new(Vector::new(self.mean.clone()), cov)
            .map_err(|e| CliError::Config(format!("invalid gaussian: {e}")))
    }
}

/// A named constraint with its variance. Built-in names are resolved here;
/// user constraints register through the library API instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub name: String,
    pub variance: f64,
}

fn default_max_iterations() -> usize {
    1000
}

fn default_convergence_tol() -> f64 {
    1e-6
}

/// Full description of one inference run. Unknown fields are rejected so a
/// typo cannot silently change an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Forward model selected by name; "synthetic" is built in.
    pub model: String,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
    /// Prior over parameters. For the EnKF the covariance also sets the
    /// spread of the first-iteration ensemble.
    pub prior: GaussianConfig,
    /// Observed data distribution (mean and noise covariance).
    pub data: GaussianConfig,
    /// Sample count J (exact) or ensemble size J (enkf).
    pub ensemble_size: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_convergence_tol")]
    pub convergence_tol: f64,
    pub seed: u64,
    /// EnKF first-iteration mean; defaults to the prior mean.
    #[serde(default)]
    pub initial_guess: Option<Vec<f64>>,
    /// Where artifacts go. Not echoed into results so that identical runs
    /// into different directories emit identical files.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub perturbed_observations: bool,
    #[serde(default)]
    pub snapshot_ensembles: bool,
    #[serde(default)]
    pub resample_jitter: f64,
    /// File-name stem for emitted artifacts; defaults to "run".
    #[serde(default)]
    pub label: Option<String>,
}

impl RunConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("run")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.model != "synthetic" {
            return Err(CliError::Config(format!("unknown model '{}'", self.model)));
        }
        if self.ensemble_size < 1 {
            return Err(CliError::Config("ensemble_size must be >= 1".into()));
        }
        if self.method == Method::Enkf && self.ensemble_size < 2 {
            return Err(CliError::Config("enkf needs ensemble_size >= 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(CliError::Config("max_iterations must be >= 1".into()));
        }
        if self.convergence_tol < 0.0 || !self.convergence_tol.is_finite() {
            return Err(CliError::Config("convergence_tol must be >= 0".into()));
        }
        if self.resample_jitter < 0.0 {
            return Err(CliError::Config("resample_jitter must be >= 0".into()));
        }
        for c in &self.constraints {
            if c.name != "synthetic-log-equality" {
                return Err(CliError::Config(format!("unknown constraint '{}'", c.name)));
            }
            if c.variance <= 0.0 {
                return Err(CliError::Config("constraint variance must be > 0".into()));
            }
        }
        if let Some(g) = &self.initial_guess {
            if g.len() != self.prior.mean.len() {
                return Err(CliError::Config(
                    "initial_guess dimension does not match prior".into(),
                ));
            }
        }
        self.prior.to_spec()?;
        self.data.to_spec()?;
        Ok(())
    }

    pub fn build_model(&self) -> SyntheticModel {
        SyntheticModel
    }

    pub fn build_observation(&self) -> ObservationOperator<f64> {
        SyntheticModel::observation_operator()
    }

    pub fn build_prior(&self) -> Result<PriorSpec<f64>, CliError> {
        Ok(PriorSpec::new(self.prior.to_spec()?))
    }

    pub fn build_data(&self) -> Result<DataSpec<f64>, CliError> {
        let spec = self.data.to_spec()?;
        DataSpec::new(spec.mean().clone(), spec.cov().clone())
            .map_err(|e| CliError::Config(format!("invalid data spec: {e}")))
    }

    pub fn build_constraints(&self) -> ConstraintSet<f64> {
        ConstraintSet::new(
            self.constraints
                .iter()
                .map(|c| synthetic_log_equality(c.variance))
                .collect(),
        )
    }

    pub fn initial_guess_vector(&self) -> Vector<f64> {
        Vector::new(
            self.initial_guess
                .clone()
                .unwrap_or_else(|| self.prior.mean.clone()),
        )
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

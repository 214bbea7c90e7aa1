//! Executes a parsed [`RunConfig`] and assembles the result artifacts.
//!
//! Every run produces a `{label}_result.json` summary plus a method-specific
//! CSV: a weighted-sample dump for exact inference, a per-iteration trace for
//! the filter. Artifact bytes depend only on the configuration, never on
//! where they are written, so result files can be diffed across machines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softcon_core::enkf::{self, EnkfConfig};
use softcon_core::exact::{
    compute_posterior_weights, draw_prior_samples, estimate as exact_estimate,
};
use softcon_core::model::{
    classify_minimum, ForwardModel, ObservationOperator, DEFAULT_GROUP_TOL,
};
use softcon_core::rng::substream;
use softcon_core::stats::Vector;

use crate::config::{Method, RunConfig};
use crate::output::{ensemble_csv, samples_csv, trace_csv, write_file};
use crate::CliError;

/// Point estimate with its reconstructed model output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta: Vec<f64>,
    pub state: Vec<f64>,
    /// Reconstructed observable `H F(theta)`.
    pub output: Vec<f64>,
    /// Which known minimum basin the estimate falls in ("I", "II",
    /// "Neither"), at the default classification tolerance.
    pub group: String,
}

/// Posterior-mode estimate from the exact sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapReport {
    pub theta: Vec<f64>,
    pub state: Vec<f64>,
    pub output: Vec<f64>,
    pub group: String,
    /// Index of the maximizing sample within the drawn set.
    pub sample_index: usize,
}

/// Serializable run summary; the `config` echo is sufficient to reproduce
/// the run byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub estimate: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub map: Option<MapReport>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ess_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ess_min: Option<f64>,
    /// Wall-clock duration of the run in seconds. Deliberately excluded
    /// from the serialized result so identical seeds produce byte-identical
    /// files; the CLI reports it on stdout instead.
    #[serde(skip_serializing, default)]
    pub wall_clock_secs: Option<f64>,
}

/// A run's summary plus the artifact files as (name, contents) pairs.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub artifacts: Vec<(String, String)>,
}

fn estimate_report(
    h: &ObservationOperator<f64>,
    theta: &Vector<f64>,
    state: &Vector<f64>,
) -> Result<EstimateReport, CliError> {
    let output = h.apply(state)?;
    Ok(EstimateReport {
        theta: theta.iter().copied().collect(),
        state: state.iter().copied().collect(),
        output: output.iter().copied().collect(),
        group: classify_minimum(theta, DEFAULT_GROUP_TOL).to_string(),
    })
}

fn execute_exact(config: &RunConfig) -> Result<RunOutput, CliError> {
    let model = config.build_model();
    let h = config.build_observation();
    let prior = config.build_prior()?;
    let data = config.build_data()?;
    let set = config.build_constraints();

    let mut rng = substream(config.seed, "exact", 0);
    let draws = draw_prior_samples(&prior, &model, config.ensemble_size, &mut rng)?;
    let weighted = compute_posterior_weights(&draws, &prior, &data, &h, &set)?;
    let est = exact_estimate(&weighted, &model);

    let result = RunResult {
        config: config.clone(),
        estimate: estimate_report(&h, &est.theta_expectation, &est.state_at_expectation)?,
        map: Some(MapReport {
            output: h.apply(&est.state_at_map)?.iter().copied().collect(),
            group: classify_minimum(&est.theta_map, DEFAULT_GROUP_TOL).to_string(),
            theta: est.theta_map.iter().copied().collect(),
            state: est.state_at_map.iter().copied().collect(),
            sample_index: est.map_index,
        }),
        iterations: 1,
        converged: true,
        ess_final: None,
        ess_min: None,
        wall_clock_secs: None,
    };
    let artifacts = vec![(
        format!("{}_samples.csv", config.label()),
        samples_csv(&weighted),
    )];
    Ok(RunOutput { result, artifacts })
}

fn execute_enkf(config: &RunConfig) -> Result<RunOutput, CliError> {
    let model = config.build_model();
    let h = config.build_observation();
    let core_config = EnkfConfig {
        prior: config.build_prior()?,
        data: config.build_data()?,
        constraints: config.build_constraints(),
        ensemble_size: config.ensemble_size,
        max_iterations: config.max_iterations,
        convergence_tol: config.convergence_tol,
        seed: config.seed,
        initial_guess: config.initial_guess_vector(),
        perturbed_observations: config.perturbed_observations,
        resample_jitter: config.resample_jitter,
        snapshot_ensembles: config.snapshot_ensembles,
    };
    let outcome = enkf::run(&core_config, &model, &h)?;

    let state = model.evaluate(&outcome.theta_star);
    let result = RunResult {
        config: config.clone(),
        estimate: estimate_report(&h, &outcome.theta_star, &state)?,
        map: None,
        iterations: outcome.trace.len(),
        converged: outcome.converged,
        ess_final: outcome.trace.records.last().map(|r| r.ess),
        ess_min: outcome.trace.min_ess(),
        wall_clock_secs: None,
    };

    let label = config.label();
    let mut artifacts = vec![(format!("{label}_trace.csv"), trace_csv(&outcome.trace))];
    if config.snapshot_ensembles {
        for r in &outcome.trace.records {
            if let Some(snapshot) = &r.ensemble_snapshot {
                artifacts.push((
                    format!("{label}_ensemble_{:04}.csv", r.iteration),
                    ensemble_csv(snapshot),
                ));
            }
        }
    }
    Ok(RunOutput { result, artifacts })
}

/// Runs a validated configuration without touching the filesystem.
pub fn execute(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let mut output = match config.method {
        Method::Exact => execute_exact(config),
        Method::Enkf => execute_enkf(config),
    }?;
    output.result.wall_clock_secs = Some(started.elapsed().as_secs_f64());
    Ok(output)
}

/// Directory a run's artifacts land in: an explicit override wins, then the
/// configuration's own `output_dir`, then the current directory.
pub fn resolve_output_dir(config: &RunConfig, out_override: Option<&Path>) -> PathBuf {
    out_override
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Writes the result JSON and all CSV artifacts for a finished run.
pub fn write_artifacts(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let label = output.result.config.label().to_string();
    let mut written = Vec::new();
    let json = serde_json::to_string_pretty(&output.result)
        .map_err(|e| CliError::Config(format!("serializing result: {e}")))?;
    let result_name = format!("{label}_result.json");
    write_file(dir, &result_name, &json)?;
    written.push(dir.join(result_name));
    for (name, contents) in &output.artifacts {
        write_file(dir, name, contents)?;
        written.push(dir.join(name));
    }
    Ok(written)
}

/// Reads, validates, and runs a configuration file, emitting all artifacts.
///
/// Validation happens before execution, so a malformed file produces no
/// output files at all.
pub fn run_from_config(path: &Path, out_override: Option<&Path>) -> Result<RunResult, CliError> {
    let text = std::fs::read_to_string(path)?;
    let config = crate::config::parse_config(&text)?;
    let output = execute(&config)?;
    let dir = resolve_output_dir(&config, out_override);
    write_artifacts(&output, &dir)?;
    Ok(output.result)
}

//! Built-in experiment presets for the benchmark model.
//!
//! Each preset pins the covariances, sample counts, and seed of one
//! published benchmark experiment so runs are stable and reproducible;
//! seeds can be overridden from the command line.

use crate::config::{ConstraintConfig, GaussianConfig, Method, RunConfig};
use crate::CliError;

pub const PRESET_NAMES: &[&str] = &[
    "table1",
    "table1-noconstraint",
    "table2",
    "table3",
    "table4",
    "fig3-sweep",
];

fn gaussian2(var: f64) -> GaussianConfig {
    GaussianConfig {
        mean: vec![0.0, 0.0],
        cov: vec![vec![var, 0.0], vec![0.0, var]],
    }
}

fn scalar_data() -> GaussianConfig {
    GaussianConfig {
        mean: vec![-1.0],
        cov: vec![vec![0.01]],
    }
}

fn log_equality(variance: f64) -> Vec<ConstraintConfig> {
    vec![ConstraintConfig {
        name: "synthetic-log-equality".into(),
        variance,
    }]
}

fn exact_config(label: &str, constraints: Vec<ConstraintConfig>, seed: u64) -> RunConfig {
    RunConfig {
        method: Method::Exact,
        model: "synthetic".into(),
        constraints,
        prior: gaussian2(3.0),
        data: scalar_data(),
        ensemble_size: 5000,
        max_iterations: 1,
        convergence_tol: 0.0,
        seed,
        initial_guess: None,
        output_dir: None,
        perturbed_observations: false,
        snapshot_ensembles: false,
        resample_jitter: 0.0,
        label: Some(label.into()),
    }
}

fn enkf_config(
    label: &str,
    prior_var: f64,
    constraints: Vec<ConstraintConfig>,
    initial_guess: (f64, f64),
    seed: u64,
) -> RunConfig {
    RunConfig {
        method: Method::Enkf,
        model: "synthetic".into(),
        constraints,
        prior: gaussian2(prior_var),
        data: scalar_data(),
        ensemble_size: 500,
        max_iterations: 1000,
        convergence_tol: 1e-6,
        seed,
        initial_guess: Some(vec![initial_guess.0, initial_guess.1]),
        output_dir: None,
        perturbed_observations: false,
        snapshot_ensembles: false,
        resample_jitter: 0.0,
        label: Some(label.into()),
    }
}

const GUESSES: [(&str, (f64, f64)); 3] = [
    ("init_m2m2", (-2.0, -2.0)),
    ("init_00", (0.0, 0.0)),
    ("init_22", (2.0, 2.0)),
];

fn enkf_sweep(name: &str, prior_var: f64, constraint_variance: Option<f64>, seed: u64) -> Vec<RunConfig> {
    GUESSES
        .iter()
        .map(|(suffix, guess)| {
            enkf_config(
                &format!("{name}_{suffix}"),
                prior_var,
                constraint_variance.map(log_equality).unwrap_or_default(),
                *guess,
                seed,
            )
        })
        .collect()
}

/// Returns the run configuration(s) for a named preset. Table presets with
/// three initial guesses expand to three runs.
pub fn preset(name: &str) -> Result<Vec<RunConfig>, CliError> {
    match name {
        "table1" => Ok(vec![exact_config("table1", log_equality(0.5), 1)]),
        "table1-noconstraint" => Ok(vec![exact_config("table1_noconstraint", vec![], 1)]),
        "table2" => Ok(enkf_sweep("table2", 1.0, Some(2.0), 36)),
        "table3" => Ok(enkf_sweep("table3", 3.0, Some(2.0), 0)),
        "table4" => Ok(enkf_sweep("table4", 1.0, Some(1.0), 0)),
        "fig3-sweep" => Ok(enkf_sweep("fig3", 1.0, None, 0)),
        other => Err(CliError::UnknownPreset(other.to_string())),
    }
}

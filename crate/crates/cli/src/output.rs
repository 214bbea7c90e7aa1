//! CSV and JSON artifact writers.
//!
//! CSV files use '.' decimals at full double precision (17 significant
//! digits) with a header row, so externally rendered plots and regression
//! diffs are bit-faithful.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use softcon_core::enkf::{Ensemble, IterationTrace};
use softcon_core::exact::WeightedSamples;
use softcon_core::model::{
    classify_minimum, cost_function, ForwardModel, ObservationOperator, DEFAULT_GROUP_TOL,
};
use softcon_core::stats::Vector;

use crate::CliError;

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Weighted exact-inference samples as CSV:
/// `theta_*, x_*, log_data, log_constraint, weight`.
pub fn samples_csv(samples: &WeightedSamples<f64>) -> String {
    let d_theta = samples.params.first().map_or(0, |p| p.len());
    let d_x = samples.states.first().map_or(0, |s| s.len());
    let mut out = String::new();
    let mut header: Vec<String> = (1..=d_theta).map(|i| format!("theta_{i}")).collect();
    header.extend((1..=d_x).map(|i| format!("x_{i}")));
    header.extend(["log_data".into(), "log_constraint".into(), "weight".into()]);
    push_row(&mut out, &header);
    for j in 0..samples.params.len() {
        let mut row: Vec<String> = samples.params[j].iter().copied().map(fmt_f64).collect();
        row.extend(samples.states[j].iter().copied().map(fmt_f64));
        row.push(fmt_f64(samples.log_data[j]));
        row.push(fmt_f64(samples.log_constraint[j]));
        row.push(fmt_f64(samples.posterior_weights[j]));
        push_row(&mut out, &row);
    }
    out
}

/// Filter trace as CSV: `iteration, theta_bar_*, output_*, ess,
/// cov_<i>_<j> (row-major), group`.
pub fn trace_csv(trace: &IterationTrace<f64>) -> String {
    let mut out = String::new();
    let Some(first) = trace.records.first() else {
        return out;
    };
    let d_theta = first.theta_bar.len();
    let d_y = first.output.len();
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=d_theta).map(|i| format!("theta_bar_{i}")));
    header.extend((1..=d_y).map(|i| format!("output_{i}")));
    header.push("ess".into());
    for i in 1..=d_theta {
        for j in 1..=d_theta {
            header.push(format!("cov_{i}_{j}"));
        }
    }
    header.push("group".into());
    push_row(&mut out, &header);
    for r in &trace.records {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.theta_bar.iter().copied().map(fmt_f64));
        row.extend(r.output.iter().copied().map(fmt_f64));
        row.push(fmt_f64(r.ess));
        row.extend(r.param_cov.data().iter().copied().map(fmt_f64));
        row.push(
            classify_minimum(&r.theta_bar, DEFAULT_GROUP_TOL).to_string(),
        );
        push_row(&mut out, &row);
    }
    out
}

/// One ensemble snapshot as CSV: `member, weight, theta_*, x_*`.
pub fn ensemble_csv(e: &Ensemble<f64>) -> String {
    let mut out = String::new();
    let d_theta = e.param_dim();
    let d_x = e.state_dim();
    let mut header = vec!["member".to_string(), "weight".to_string()];
    header.extend((1..=d_theta).map(|i| format!("theta_{i}")));
    header.extend((1..=d_x).map(|i| format!("x_{i}")));
    push_row(&mut out, &header);
    for (j, member) in e.members.iter().enumerate() {
        let mut row = vec![j.to_string(), fmt_f64(e.weights[j])];
        row.extend(member.theta.iter().copied().map(fmt_f64));
        row.extend(member.x.iter().copied().map(fmt_f64));
        push_row(&mut out, &row);
    }
    out
}

/// Rectangular grid for cost-surface emission.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub min: (f64, f64),
    pub max: (f64, f64),
    pub steps: (usize, usize),
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.steps.0 < 1 || self.steps.1 < 1 {
            return Err(CliError::Config("grid needs at least 1 step per axis".into()));
        }
        if self.min.0 > self.max.0 || self.min.1 > self.max.1 {
            return Err(CliError::Config("grid min exceeds max".into()));
        }
        Ok(())
    }
}

/// Cost-function values on a parameter grid: `theta_1, theta_2, cost`.
/// Emits `steps.0 * steps.1` rows, endpoints included.
pub fn contour_csv(
    model: &dyn ForwardModel<f64>,
    h: &ObservationOperator<f64>,
    observed: &Vector<f64>,
    grid: &GridSpec,
) -> Result<String, CliError> {
    grid.validate()?;
    let coord = |min: f64, max: f64, steps: usize, i: usize| {
        if steps == 1 {
            min
        } else {
            min + (max - min) * i as f64 / (steps - 1) as f64
        }
    };
    let mut out = String::new();
    push_row(
        &mut out,
        &["theta_1".into(), "theta_2".into(), "cost".into()],
    );
    for i in 0..grid.steps.0 {
        let t1 = coord(grid.min.0, grid.max.0, grid.steps.0, i);
        for j in 0..grid.steps.1 {
            let t2 = coord(grid.min.1, grid.max.1, grid.steps.1, j);
            let theta = Vector::new(vec![t1, t2]);
            let cost = cost_function(model, h, &theta, observed)?;
            let _ = write!(out, "{},{},{}\n", fmt_f64(t1), fmt_f64(t2), fmt_f64(cost));
        }
    }
    Ok(out)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

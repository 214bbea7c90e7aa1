//! End-to-end acceptance checks for the shipped benchmark experiments.
//!
//! Each test covers one release criterion and prints a single pass line on
//! success (run with `--nocapture` to see them); a failure carries the
//! offending numbers in its panic message.

use softcon_cli::presets::preset;
use softcon_cli::runner::{execute, RunResult};
use softcon_core::constraints::{synthetic_log_equality, ConstraintSet};
use softcon_core::exact::{argmin_objective, compute_posterior_weights, draw_prior_samples, estimate, DataSpec, PriorSpec};
use softcon_core::model::SyntheticModel;
use softcon_core::rng::substream;
use softcon_core::stats::{GaussianSpec, Matrix, Vector};

const GROUP_II_CENTER: (f64, f64) = (-1.0, -1.0);

fn group_ii_radius() -> f64 {
    1.5f64.ln().sqrt()
}

fn run_preset(name: &str) -> Vec<RunResult> {
    preset(name)
        .unwrap()
        .iter()
        .map(|c| execute(c).expect("preset run succeeds").result)
        .collect()
}

fn dist(theta: &[f64], target: (f64, f64)) -> f64 {
    ((theta[0] - target.0).powi(2) + (theta[1] - target.1).powi(2)).sqrt()
}

fn assert_group_i(result: &RunResult, tol: f64) {
    let d = dist(&result.estimate.theta, (1.0, 1.0));
    assert!(
        d <= tol,
        "{}: theta {:?} is {d:.4} from (1,1), tolerance {tol}",
        result.config.label(),
        result.estimate.theta
    );
}

fn assert_group_ii(result: &RunResult, tol: f64) {
    let d = (dist(&result.estimate.theta, GROUP_II_CENTER) - group_ii_radius()).abs();
    assert!(
        d <= tol,
        "{}: theta {:?} is {d:.4} off the spurious-minimum circle, tolerance {tol}",
        result.config.label(),
        result.estimate.theta
    );
}

fn assert_output_near(result: &RunResult, target: f64, tol: f64) {
    let y = result.estimate.output[0];
    assert!(
        (y - target).abs() <= tol,
        "{}: output {y:.5} not within {tol} of {target}",
        result.config.label()
    );
}

#[test]
fn criterion_1_exact_inference_estimates() {
    let constrained = &run_preset("table1")[0];
    let exp = &constrained.estimate.theta;
    assert!(
        (exp[0] - 0.9926).abs() <= 0.1 && (exp[1] - 0.9449).abs() <= 0.1,
        "constrained expectation {exp:?} not within 0.1 of (0.9926, 0.9449)"
    );
    let map = &constrained.map.as_ref().expect("exact runs report a mode").theta;
    assert!(
        (map[0] - 0.9845).abs() <= 0.1 && (map[1] - 0.9698).abs() <= 0.1,
        "mode {map:?} not within 0.1 of (0.9845, 0.9698)"
    );
    assert_output_near(constrained, -1.0, 0.02);

    let unconstrained = &run_preset("table1-noconstraint")[0];
    let norm = unconstrained
        .estimate
        .theta
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(
        norm <= 0.5,
        "unconstrained expectation {:?} has inf-norm {norm:.4} > 0.5",
        unconstrained.estimate.theta
    );
    println!("criterion 1 (exact inference estimates): pass");
}

#[test]
fn criterion_2_unconstrained_filter_basins() {
    let runs = run_preset("fig3-sweep");
    let by_label = |label: &str| {
        runs.iter()
            .find(|r| r.config.label().ends_with(label))
            .unwrap()
    };
    assert_group_i(by_label("init_22"), 0.05);
    assert_group_ii(by_label("init_m2m2"), 0.1);
    assert_group_ii(by_label("init_00"), 0.1);
    for run in &runs {
        assert_output_near(run, -1.0, 0.02);
    }
    println!("criterion 2 (unconstrained filter basins): pass");
}

#[test]
fn criterion_3_weak_constraint_narrow_prior() {
    let runs = run_preset("table2");
    for run in &runs {
        if run.config.label().ends_with("init_m2m2") {
            assert_group_ii(run, 0.1);
        } else {
            assert_group_i(run, 0.05);
        }
    }
    println!("criterion 3 (constraint variance 2.0, prior variance 1): pass");
}

#[test]
fn criterion_4_weak_constraint_wide_prior() {
    for run in &run_preset("table3") {
        assert_group_i(run, 0.05);
    }
    println!("criterion 4 (constraint variance 2.0, prior variance 3): pass");
}

#[test]
fn criterion_5_tight_constraint_narrow_prior() {
    for run in &run_preset("table4") {
        assert_group_i(run, 0.05);
    }
    println!("criterion 5 (constraint variance 1.0, prior variance 1): pass");
}

#[test]
fn criterion_6_mode_equals_penalized_least_squares_argmin() {
    let model = SyntheticModel;
    let h = SyntheticModel::observation_operator();
    for trial in 0..20u64 {
        use rand::Rng as _;
        let mut cfg_rng = substream(42, "map-configs", trial);
        let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * cfg_rng.random::<f64>();
        let prior_var = draw(0.3, 4.0);
        let data_var = draw(0.005, 0.5);
        let constraint_var = draw(0.2, 4.0);

        let prior = PriorSpec::new(
            GaussianSpec::new(
                Vector::new(vec![0.0, 0.0]),
                Matrix::scaled_identity(2, prior_var),
            )
            .unwrap(),
        );
        let data = DataSpec::new(
            Vector::new(vec![-1.0]),
            Matrix::scaled_identity(1, data_var),
        )
        .unwrap();
        let mut set = ConstraintSet::empty();
        set.push(synthetic_log_equality(constraint_var));

        let mut rng = substream(42, "map-samples", trial);
        let draws = draw_prior_samples(&prior, &model, 1000, &mut rng).unwrap();
        let weighted = compute_posterior_weights(&draws, &prior, &data, &h, &set).unwrap();
        let mode_index = estimate(&weighted, &model).map_index;
        let objective_index = argmin_objective(&draws, &prior, &data, &h, &set, &model).unwrap();
        assert_eq!(
            mode_index, objective_index,
            "trial {trial}: mode index {mode_index} != objective argmin {objective_index} \
             (prior {prior_var:.3}, data {data_var:.3}, constraint {constraint_var:.3})"
        );
    }
    println!("criterion 6 (posterior mode matches penalized least-squares argmin): pass");
}

#[test]
fn criterion_7_invariant_suites() {
    // The randomized suites live in the core crate's `properties` test
    // target; this check exercises one representative slice of each plus
    // full bitwise determinism at the artifact level.
    let config = &preset("table2").unwrap()[1];
    let a = execute(config).unwrap();
    let b = execute(config).unwrap();
    assert_eq!(
        serde_json::to_string(&a.result).unwrap(),
        serde_json::to_string(&b.result).unwrap(),
        "re-running an identical config changed the result JSON"
    );
    assert_eq!(a.artifacts, b.artifacts, "trace artifacts differ between identical runs");

    // Inert constraint: an enormous constraint variance reproduces the
    // unconstrained expectation.
    let mut inert = preset("table1").unwrap().remove(0);
    inert.constraints[0].variance = 1e8;
    let inert_result = execute(&inert).unwrap().result;
    let free = execute(&preset("table1-noconstraint").unwrap()[0]).unwrap().result;
    for d in 0..2 {
        let gap = (inert_result.estimate.theta[d] - free.estimate.theta[d]).abs();
        assert!(
            gap <= 1e-6,
            "inert constraint shifted component {d} by {gap:e}"
        );
    }

    // Exact-inference posterior weights are normalized.
    let weights_csv = &execute(&preset("table1").unwrap()[0]).unwrap().artifacts[0].1;
    let sum: f64 = weights_csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!(
        (sum - 1.0).abs() <= 1e-12,
        "posterior weights sum to {sum}, expected 1"
    );
    println!("criterion 7 (invariant suites): pass");
}

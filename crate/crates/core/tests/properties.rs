//! Randomized invariant checks on the numerical kernels.

use proptest::prelude::*;
use softcon_core::constraints::{synthetic_log_equality, ConstraintSet, ConstraintTerm};
use softcon_core::enkf::{constraint_reweigh, AugmentedState, Ensemble};
use softcon_core::exact::{compute_posterior_weights, draw_prior_samples, DataSpec, PriorSpec};
use softcon_core::model::{ForwardModel, SyntheticModel};
use softcon_core::rng::substream;
use softcon_core::stats::{
    cholesky, normalize_log_weights, weighted_covariance, weighted_mean, GaussianSpec, Matrix,
    Vector,
};

fn finite_log_weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-700.0f64..700.0, 1..60)
}

proptest! {
    /// Normalized weights sum to one and shifting every log weight by a
    /// constant leaves them unchanged.
    #[test]
    fn normalization_and_shift_invariance(logs in finite_log_weights(), shift in -200.0f64..200.0) {
        let w = normalize_log_weights(&logs).unwrap();
        let sum: f64 = w.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);

        let shifted: Vec<f64> = logs.iter().map(|l| l + shift).collect();
        let w2 = normalize_log_weights(&shifted).unwrap();
        for (a, b) in w.iter().zip(w2.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    /// Reweighing an ensemble by constraint likelihoods keeps the weights
    /// normalized.
    #[test]
    fn reweigh_preserves_normalization(seed in 0u64..1000, size in 2usize..40, variance in 0.1f64..10.0) {
        let model = SyntheticModel;
        let mut rng = substream(seed, "prop-reweigh", 0);
        let members: Vec<AugmentedState<f64>> = (0..size)
            .map(|_| {
                let theta = Vector::new(vec![
                    rng.random::<f64>() * 6.0 - 3.0,
                    rng.random::<f64>() * 6.0 - 3.0,
                ]);
                let x = model.evaluate(&theta);
                AugmentedState { theta, x }
            })
            .collect();
        let weights = Vector::new(vec![1.0 / size as f64; size]);
        let e = Ensemble { members, weights };
        let mut set = ConstraintSet::empty();
        set.push(synthetic_log_equality(variance));
        let reweighed = constraint_reweigh(&e, &set).unwrap();
        let sum: f64 = reweighed.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    /// An inequality constraint's likelihood is the same at every feasible
    /// point because the residual max(0, g) vanishes there.
    #[test]
    fn inequality_constant_on_feasible_side(variance in 0.05f64..20.0, a in -50.0f64..0.0, b in -50.0f64..0.0) {
        let term: ConstraintTerm<f64> =
            ConstraintTerm::inequality(|x: &Vector<f64>| Some(x[0]), variance);
        let at = |v: f64| term.log_likelihood(&Vector::new(vec![v])).log_likelihood;
        prop_assert_eq!(at(a), at(b));
        prop_assert_eq!(at(a), at(0.0));
        // Infeasible points are strictly penalized.
        prop_assert!(at(1.0) < at(a));
    }

    /// Weighted moments agree with a brute-force loop.
    #[test]
    fn weighted_moments_match_loop(seed in 0u64..1000, n in 2usize..30) {
        let mut rng = substream(seed, "prop-moments", 0);
        let points: Vec<Vector<f64>> = (0..n)
            .map(|_| Vector::new(vec![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0]))
            .collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let weights = Vector::new(raw.iter().map(|w| w / total).collect::<Vec<_>>());

        let mean = weighted_mean(&points, &weights).unwrap();
        let cov = weighted_covariance(&points, &weights, &mean).unwrap();

        for d in 0..2 {
            let m: f64 = (0..n).map(|i| weights[i] * points[i][d]).sum();
            prop_assert!((mean[d] - m).abs() <= 1e-12);
        }
        for r in 0..2 {
            for c in 0..2 {
                let v: f64 = (0..n)
                    .map(|i| weights[i] * (points[i][r] - mean[r]) * (points[i][c] - mean[c]))
                    .sum();
                prop_assert!((cov[(r, c)] - v).abs() <= 1e-12);
            }
        }
    }

    /// Cholesky round-trip: factoring L Lᵀ recovers L.
    #[test]
    fn cholesky_round_trip(seed in 0u64..1000, dim in 1usize..6) {
        let mut rng = substream(seed, "prop-chol", 0);
        let mut l = Matrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..r {
                let v = rng.random::<f64>() * 2.0 - 1.0;
                l[(r, c)] = v;
            }
            l[(r, r)] = rng.random::<f64>() + 0.5;
        }
        let a = l.matmul(&l.transpose());
        let back = cholesky(&a).unwrap();
        for r in 0..dim {
            for c in 0..dim {
                prop_assert!((back[(r, c)] - l[(r, c)]).abs() <= 1e-9 * (1.0 + l[(r, c)].abs()));
            }
        }
    }
}

/// A nearly-flat equality constraint (huge variance) leaves the posterior
/// weights indistinguishable from the unconstrained weights: total
/// variation distance below 1e-6.
#[test]
fn inert_constraint_matches_unconstrained_weights() {
    let model = SyntheticModel;
    let h = SyntheticModel::observation_operator();
    let prior = PriorSpec::new(
        GaussianSpec::new(Vector::new(vec![0.0, 0.0]), Matrix::scaled_identity(2, 3.0)).unwrap(),
    );
    let data = DataSpec::new(Vector::new(vec![-1.0]), Matrix::scaled_identity(1, 0.01)).unwrap();
    let mut rng = substream(11, "inert", 0);
    let draws = draw_prior_samples(&prior, &model, 2000, &mut rng).unwrap();

    let unconstrained =
        compute_posterior_weights(&draws, &prior, &data, &h, &ConstraintSet::empty()).unwrap();
    let mut inert = ConstraintSet::empty();
    inert.push(synthetic_log_equality(1e8));
    let constrained = compute_posterior_weights(&draws, &prior, &data, &h, &inert).unwrap();

    let tv: f64 = unconstrained
        .posterior_weights
        .iter()
        .zip(constrained.posterior_weights.iter())
        .map(|(a, b): (&f64, &f64)| (a - b).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 1e-6, "total variation {tv} exceeds 1e-6");
}

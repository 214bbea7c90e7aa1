//! Sampling-based constrained Bayesian inference.
//!
//! The prior is used as the proposal: draw parameter samples from it, push
//! them through the forward model, and weight each sample by the product of
//! the data likelihood and the constraint likelihood. Because the proposal
//! equals the prior, the prior density cancels from the self-normalized
//! importance weights; it re-enters when scoring samples for the MAP, which
//! maximizes the full unnormalized posterior.
//!
//! All densities are combined in log space and exponentiated only after
//! max-subtraction; weight sums are sequential in sample index so results
//! do not depend on evaluation order.

use rand::Rng;

use crate::constraints::ConstraintSet;
use crate::error::Result;
use crate::model::{ForwardModel, ObservationOperator};
use crate::scalar::Scalar;
use crate::stats::{
    mvn_logpdf, mvn_sample, normalize_log_weights, solve_spd, weighted_mean, GaussianSpec,
    Vector,
};

/// Gaussian prior over parameters.
#[derive(Debug, Clone)]
pub struct PriorSpec<T> {
    pub gaussian: GaussianSpec<T>,
}

impl<T: Scalar> PriorSpec<T> {
    pub fn new(gaussian: GaussianSpec<T>) -> Self {
        Self { gaussian }
    }

    pub fn param_dim(&self) -> usize {
        self.gaussian.dim()
    }
}

/// Observed data: mean and noise covariance of the observation distribution.
#[derive(Debug, Clone)]
pub struct DataSpec<T> {
    gaussian: GaussianSpec<T>,
}

impl<T: Scalar> DataSpec<T> {
    pub fn new(observed_mean: Vector<T>, noise_cov: crate::stats::Matrix<T>) -> Result<Self> {
        Ok(Self {
            gaussian: GaussianSpec::new(observed_mean, noise_cov)?,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.gaussian.dim()
    }

    pub fn observed_mean(&self) -> &Vector<T> {
        self.gaussian.mean()
    }

    pub fn noise_cov(&self) -> &crate::stats::Matrix<T> {
        self.gaussian.cov()
    }

    pub fn gaussian(&self) -> &GaussianSpec<T> {
        &self.gaussian
    }
}

/// Prior draws pushed through the forward model.
#[derive(Debug, Clone)]
pub struct PriorSamples<T> {
    pub params: Vec<Vector<T>>,
    pub states: Vec<Vector<T>>,
}

/// Samples with per-sample log likelihood pieces and normalized posterior
/// weights.
#[derive(Debug, Clone)]
pub struct WeightedSamples<T> {
    pub params: Vec<Vector<T>>,
    pub states: Vec<Vector<T>>,
    pub log_prior: Vec<T>,
    pub log_data: Vec<T>,
    pub log_constraint: Vec<T>,
    pub posterior_weights: Vector<T>,
}

/// Posterior-mean and MAP estimates with their propagated states/outputs.
#[derive(Debug, Clone)]
pub struct ExactEstimate<T> {
    pub theta_expectation: Vector<T>,
    pub theta_map: Vector<T>,
    pub map_index: usize,
    pub state_at_expectation: Vector<T>,
    pub state_at_map: Vector<T>,
}

/// Draws `count` parameter samples from the prior and evaluates the model.
pub fn draw_prior_samples<T: Scalar, R: Rng>(
    prior: &PriorSpec<T>,
    model: &dyn ForwardModel<T>,
    count: usize,
    rng: &mut R,
) -> Result<PriorSamples<T>> {
    assert!(count >= 1);
    let params = mvn_sample(&prior.gaussian, count, rng)?;
    let states = params.iter().map(|t| model.evaluate(t)).collect();
    Ok(PriorSamples { params, states })
}

/// Weights prior samples by data and constraint likelihoods.
///
/// The prior enters through the sampling step, not the weights: these are
/// self-normalized importance weights with the prior as proposal. The prior
/// log density is still recorded per sample for MAP scoring.
pub fn compute_posterior_weights<T: Scalar>(
    samples: &PriorSamples<T>,
    prior: &PriorSpec<T>,
    data: &DataSpec<T>,
    h: &ObservationOperator<T>,
    set: &ConstraintSet<T>,
) -> Result<WeightedSamples<T>> {
    assert!(!samples.params.is_empty());
    let j = samples.params.len();
    let mut log_prior = Vec::with_capacity(j);
    let mut log_data = Vec::with_capacity(j);
    let mut log_constraint = Vec::with_capacity(j);
    let mut log_weights = Vec::with_capacity(j);
    for (theta, x) in samples.params.iter().zip(samples.states.iter()) {
        let lp = mvn_logpdf(theta, &prior.gaussian)?;
        let y = h.apply(x)?;
        let ld = mvn_logpdf(&y, data.gaussian())?;
        let lc = set.log_likelihood(x);
        log_prior.push(lp);
        log_data.push(ld);
        log_constraint.push(lc);
        log_weights.push(ld + lc);
    }
    let posterior_weights = normalize_log_weights(&log_weights)?;
    Ok(WeightedSamples {
        params: samples.params.clone(),
        states: samples.states.clone(),
        log_prior,
        log_data,
        log_constraint,
        posterior_weights,
    })
}

/// Posterior mean and MAP over the weighted sample set.
///
/// The MAP maximizes `log prior + log data + log constraint` (the full
/// unnormalized posterior); ties break to the lowest index.
pub fn estimate<T: Scalar>(
    samples: &WeightedSamples<T>,
    model: &dyn ForwardModel<T>,
) -> ExactEstimate<T> {
    let theta_expectation =
        weighted_mean(&samples.params, &samples.posterior_weights).expect("normalized weights");
    let mut map_index = 0;
    let mut best = T::neg_infinity();
    for i in 0..samples.params.len() {
        let score = samples.log_prior[i] + samples.log_data[i] + samples.log_constraint[i];
        if score > best {
            best = score;
            map_index = i;
        }
    }
    let theta_map = samples.params[map_index].clone();
    let state_at_expectation = model.evaluate(&theta_expectation);
    let state_at_map = samples.states[map_index].clone();
    ExactEstimate {
        theta_expectation,
        theta_map,
        map_index,
        state_at_expectation,
        state_at_map,
    }
}

/// Penalized-least-squares objective equivalent to the negative log
/// posterior up to an additive constant:
/// `||S_theta^-1/2 (theta - mean)||^2 + ||S_l^-1/2 (y - H F(theta))||^2
///  + ||S_c^-1/2 G(F(theta))||^2`.
///
/// Equality terms contribute `g^2 / sigma^2` and inequalities
/// `max(0,g)^2 / sigma^2`; a disjunction has no quadratic form, so it
/// contributes `-2 log L`, which preserves the argmin. Undefined constraint
/// states yield +inf.
pub fn map_optimization_objective<T: Scalar>(
    theta: &Vector<T>,
    prior: &PriorSpec<T>,
    data: &DataSpec<T>,
    h: &ObservationOperator<T>,
    set: &ConstraintSet<T>,
    model: &dyn ForwardModel<T>,
) -> Result<T> {
    let two = T::from_f64_lossy(2.0);

    let r_prior = theta.sub(prior.gaussian.mean());
    let prior_term = r_prior.dot(&solve_spd(prior.gaussian.cov(), &r_prior)?);

    let x = model.evaluate(theta);
    let r_data = data.observed_mean().sub(&h.apply(&x)?);
    let data_term = r_data.dot(&solve_spd(data.noise_cov(), &r_data)?);

    let mut constraint_term = T::zero();
    for term in set.terms() {
        use crate::constraints::ConstraintTerm::*;
        match term {
            Equality { variance, .. } => match term.equality_residual(&x) {
                Some(g) => constraint_term += g * g / *variance,
                None => return Ok(T::infinity()),
            },
            Inequality { variance, .. } => match term.inequality_residual(&x) {
                Some(g) => constraint_term += g * g / *variance,
                None => return Ok(T::infinity()),
            },
            Disjunction { .. } => {
                constraint_term += -two * term.log_likelihood(&x).log_likelihood;
            }
        }
    }
    Ok(prior_term + data_term + constraint_term)
}

/// Index of the sample minimizing [`map_optimization_objective`]; ties break
/// to the lowest index.
pub fn argmin_objective<T: Scalar>(
    samples: &PriorSamples<T>,
    prior: &PriorSpec<T>,
    data: &DataSpec<T>,
    h: &ObservationOperator<T>,
    set: &ConstraintSet<T>,
    model: &dyn ForwardModel<T>,
) -> Result<usize> {
    let mut best_idx = 0;
    let mut best = T::infinity();
    for (i, theta) in samples.params.iter().enumerate() {
        let v = map_optimization_objective(theta, prior, data, h, set, model)?;
        if v < best {
            best = v;
            best_idx = i;
        }
    }
    Ok(best_idx)
}

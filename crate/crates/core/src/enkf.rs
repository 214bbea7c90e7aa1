//! Iterative ensemble Kalman filter with constraint reweighting.
//!
//! Parameters and states are filtered jointly as the augmented state
//! `z = [theta; x]`. Each iteration: sample a fresh parameter ensemble from
//! the current Gaussian summary, push it through the forward model, apply
//! the Kalman update toward the observed data, reweigh members by their
//! constraint likelihood, and condense the weighted ensemble back to a
//! parameter mean and covariance for the next iteration's sampling.
//!
//! The Kalman update uses the deterministic observed mean for every member
//! (no observation perturbation) by default; perturbed observations are
//! available behind a flag for comparison.

use rand::Rng;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::exact::{DataSpec, PriorSpec};
use crate::model::{ForwardModel, ObservationOperator};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::stats::{
    effective_sample_size, mvn_sample, normalize_log_weights, solve_spd, weighted_covariance,
    weighted_mean, GaussianSpec, Matrix, Vector,
};

/// One ensemble member: parameters plus (possibly Kalman-shifted) states.
///
/// Right after initialization or resampling `x = F(theta)`; the Kalman
/// update moves both blocks jointly, after which `x` is no longer exactly
/// the model image of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState<T> {
    pub theta: Vector<T>,
    pub x: Vector<T>,
}

impl<T: Scalar> AugmentedState<T> {
    pub fn stacked(&self) -> Vector<T> {
        self.theta.stack(&self.x)
    }

    pub fn from_stacked(z: &Vector<T>, param_dim: usize) -> Self {
        Self {
            theta: z.segment(0, param_dim),
            x: z.segment(param_dim, z.len() - param_dim),
        }
    }
}

/// Weighted collection of augmented states.
#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    pub members: Vec<AugmentedState<T>>,
    pub weights: Vector<T>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn param_dim(&self) -> usize {
        self.members.first().map_or(0, |m| m.theta.len())
    }

    pub fn state_dim(&self) -> usize {
        self.members.first().map_or(0, |m| m.x.len())
    }

    fn uniform_weights(count: usize) -> Vector<T> {
        Vector::new(vec![T::one() / T::from_f64_lossy(count as f64); count])
    }
}

/// Full configuration of one filter run.
#[derive(Debug, Clone)]
pub struct EnkfConfig<T> {
    pub prior: PriorSpec<T>,
    pub data: DataSpec<T>,
    pub constraints: ConstraintSet<T>,
    pub ensemble_size: usize,
    pub max_iterations: usize,
    /// Early-stop tolerance on the inf-norm drift of the parameter mean;
    /// must hold for [`Self::CONVERGENCE_STREAK`] consecutive iterations.
    pub convergence_tol: T,
    pub seed: u64,
    /// Mean of the first-iteration sampling distribution (the prior
    /// covariance supplies its spread).
    pub initial_guess: Vector<T>,
    /// Add observation noise draws to the data in the Kalman update.
    pub perturbed_observations: bool,
    /// Jitter `eps * I` added to the posterior parameter covariance before
    /// resampling; 0 disables it and lets ensembles collapse.
    pub resample_jitter: T,
    /// Record full ensemble snapshots in the trace.
    pub snapshot_ensembles: bool,
}

impl<T: Scalar> EnkfConfig<T> {
    /// Consecutive converged iterations required before early stop.
    pub const CONVERGENCE_STREAK: usize = 10;

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(Error::DimensionMismatch {
                context: "ensemble_size must be >= 2",
                expected: 2,
                actual: self.ensemble_size,
            });
        }
        assert!(self.max_iterations >= 1);
        assert!(self.convergence_tol >= T::zero());
        Ok(())
    }
}

/// Per-iteration record.
#[derive(Debug, Clone)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub theta_bar: Vector<T>,
    /// Reconstructed output `H F(theta_bar)`.
    pub output: Vector<T>,
    pub param_cov: Matrix<T>,
    pub ess: T,
    pub ensemble_snapshot: Option<Ensemble<T>>,
}

/// Trace of a whole run.
#[derive(Debug, Clone)]
pub struct IterationTrace<T> {
    pub records: Vec<IterationRecord<T>>,
}

impl<T> Default for IterationTrace<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

impl<T: Scalar> IterationTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn min_ess(&self) -> Option<T> {
        self.records
            .iter()
            .map(|r| r.ess)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: T| a.min(v))))
    }
}

/// Samples the initial ensemble: `theta ~ N(theta0, Sigma_theta)`,
/// `x = F(theta)`, uniform weights.
pub fn init_ensemble<T: Scalar, R: Rng>(
    config: &EnkfConfig<T>,
    model: &dyn ForwardModel<T>,
    rng: &mut R,
) -> Result<Ensemble<T>> {
    config.validate()?;
    let spec = GaussianSpec::new(
        config.initial_guess.clone(),
        config.prior.gaussian.cov().clone(),
    )?;
    sample_ensemble(&spec, model, config.ensemble_size, rng)
}

fn sample_ensemble<T: Scalar, R: Rng>(
    spec: &GaussianSpec<T>,
    model: &dyn ForwardModel<T>,
    count: usize,
    rng: &mut R,
) -> Result<Ensemble<T>> {
    let thetas = mvn_sample(spec, count, rng)?;
    let members = thetas
        .into_iter()
        .map(|theta| {
            let x = model.evaluate(&theta);
            AugmentedState { theta, x }
        })
        .collect();
    Ok(Ensemble {
        members,
        weights: Ensemble::<T>::uniform_weights(count),
    })
}

/// Weighted mean and covariance of the stacked augmented states.
pub fn ensemble_moments<T: Scalar>(e: &Ensemble<T>) -> Result<(Vector<T>, Matrix<T>)> {
    let stacked: Vec<Vector<T>> = e.members.iter().map(|m| m.stacked()).collect();
    let mean = weighted_mean(&stacked, &e.weights)?;
    let cov = weighted_covariance(&stacked, &e.weights, &mean)?;
    Ok((mean, cov))
}

/// Builds the augmented observation operator `[0 | H]` acting on `z`.
fn augmented_observation<T: Scalar>(h: &ObservationOperator<T>, param_dim: usize) -> Matrix<T> {
    let d_y = h.obs_dim();
    let d_x = h.state_dim();
    let mut m = Matrix::zeros(d_y, param_dim + d_x);
    for i in 0..d_y {
        for j in 0..d_x {
            m[(i, param_dim + j)] = h.matrix()[(i, j)];
        }
    }
    m
}

/// Kalman update of every member toward the observed data.
///
/// `z <- z + C Ht^T (Ht C Ht^T + Sigma_l)^-1 (y - Ht z)` with
/// `Ht = [0 | H]`; weights are untouched. `observations[j]` supplies the
/// data vector for member `j` (the same deterministic mean for all members
/// unless perturbation is enabled).
pub fn kalman_update<T: Scalar>(
    e: &Ensemble<T>,
    h: &ObservationOperator<T>,
    data: &DataSpec<T>,
    observations: &[Vector<T>],
) -> Result<Ensemble<T>> {
    assert_eq!(observations.len(), e.size());
    let param_dim = e.param_dim();
    let h_aug = augmented_observation(h, param_dim);
    let (_, cov) = ensemble_moments(e)?;

    // Innovation matrix S = Ht C Ht^T + Sigma_l.
    let ch_t = cov.matmul(&h_aug.transpose());
    let s = h_aug.matmul(&ch_t).add(data.noise_cov());

    // Gain K = C Ht^T S^-1, built column-by-column via SPD solves.
    let d_y = h.obs_dim();
    let dim_z = param_dim + e.state_dim();
    let mut s_inv = Matrix::zeros(d_y, d_y);
    for col in 0..d_y {
        let mut unit = Vector::zeros(d_y);
        unit[col] = T::one();
        let x = solve_spd(&s, &unit).map_err(|_| Error::SingularInnovation)?;
        for row in 0..d_y {
            s_inv[(row, col)] = x[row];
        }
    }
    let gain = ch_t.matmul(&s_inv); // dim_z x d_y
    debug_assert_eq!(gain.rows(), dim_z);

    let members = e
        .members
        .iter()
        .zip(observations.iter())
        .map(|(member, y)| {
            let z = member.stacked();
            let innovation = y.sub(&h_aug.matvec(&z));
            let updated = z.add(&gain.matvec(&innovation));
            AugmentedState::from_stacked(&updated, param_dim)
        })
        .collect();
    Ok(Ensemble {
        members,
        weights: e.weights.clone(),
    })
}

/// Multiplies each weight by the member's constraint likelihood and
/// renormalizes (in log space). Members are untouched; an empty constraint
/// set returns the weights unchanged.
pub fn constraint_reweigh<T: Scalar>(
    e: &Ensemble<T>,
    set: &ConstraintSet<T>,
) -> Result<Ensemble<T>> {
    if set.is_empty() {
        return Ok(e.clone());
    }
    let log_weights: Vec<T> = e
        .members
        .iter()
        .zip(e.weights.iter())
        .map(|(m, &w)| {
            let lw = if w > T::zero() {
                w.ln()
            } else {
                T::neg_infinity()
            };
            lw + set.log_likelihood(&m.x)
        })
        .collect();
    let weights = normalize_log_weights(&log_weights)?;
    Ok(Ensemble {
        members: e.members.clone(),
        weights,
    })
}

/// Posterior summary of a weighted ensemble: augmented mean, its parameter
/// block, and the weighted parameter covariance about that block.
pub fn constrained_estimate<T: Scalar>(
    e: &Ensemble<T>,
) -> Result<(Vector<T>, Vector<T>, Matrix<T>)> {
    let (z_bar, _) = {
        let stacked: Vec<Vector<T>> = e.members.iter().map(|m| m.stacked()).collect();
        let mean = weighted_mean(&stacked, &e.weights)?;
        (mean, ())
    };
    let param_dim = e.param_dim();
    let theta_bar = z_bar.segment(0, param_dim);
    let thetas: Vec<Vector<T>> = e.members.iter().map(|m| m.theta.clone()).collect();
    let cov = weighted_covariance(&thetas, &e.weights, &theta_bar)?;
    Ok((z_bar, theta_bar, cov))
}

/// Draws a fresh uniform-weight ensemble from `N(theta_bar, cov)` and
/// re-evaluates the model at each member.
pub fn resample<T: Scalar, R: Rng>(
    theta_bar: &Vector<T>,
    cov: &Matrix<T>,
    model: &dyn ForwardModel<T>,
    count: usize,
    rng: &mut R,
) -> Result<Ensemble<T>> {
    let spec = GaussianSpec::new(theta_bar.clone(), cov.clone())?;
    sample_ensemble(&spec, model, count, rng)
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub theta_star: Vector<T>,
    pub trace: IterationTrace<T>,
    pub converged: bool,
}

/// Runs the full iterative filter.
///
/// Loop per iteration: Kalman update, constraint reweigh, posterior
/// summary, resample. Stops early once the parameter mean drifts less than
/// `convergence_tol` (inf-norm) for 10 consecutive iterations. Every source
/// of randomness comes from a sub-stream keyed on
/// `(seed, purpose, iteration)`, so results are reproducible bit for bit.
pub fn run<T: Scalar>(
    config: &EnkfConfig<T>,
    model: &dyn ForwardModel<T>,
    h: &ObservationOperator<T>,
) -> Result<RunOutcome<T>> {
    config.validate()?;
    let mut ensemble = init_ensemble(config, model, &mut substream(config.seed, "init", 0))?;
    let mut trace = IterationTrace::default();
    let mut prev_theta: Option<Vector<T>> = None;
    let mut streak = 0usize;
    let mut converged = false;
    let mut theta_star = config.initial_guess.clone();

    for iteration in 0..config.max_iterations {
        let observations = if config.perturbed_observations {
            let mut rng = substream(config.seed, "obs-perturb", iteration as u64);
            mvn_sample(config.data.gaussian(), ensemble.size(), &mut rng)?
        } else {
            vec![config.data.observed_mean().clone(); ensemble.size()]
        };
        let updated = kalman_update(&ensemble, h, &config.data, &observations)?;
        let reweighed = constraint_reweigh(&updated, &config.constraints)?;
        let (_, theta_bar, param_cov) = constrained_estimate(&reweighed)?;

        let output = h.apply(&model.evaluate(&theta_bar))?;
        let ess = effective_sample_size(&reweighed.weights);
        trace.records.push(IterationRecord {
            iteration,
            theta_bar: theta_bar.clone(),
            output,
            param_cov: param_cov.clone(),
            ess,
            ensemble_snapshot: config.snapshot_ensembles.then(|| reweighed.clone()),
        });

        if let Some(prev) = &prev_theta {
            if theta_bar.sub(prev).norm_inf() < config.convergence_tol {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        prev_theta = Some(theta_bar.clone());
        theta_star = theta_bar.clone();

        if streak >= EnkfConfig::<T>::CONVERGENCE_STREAK {
            converged = true;
            break;
        }

        if iteration + 1 < config.max_iterations {
            let resample_cov = if config.resample_jitter > T::zero() {
                param_cov.add(&Matrix::scaled_identity(
                    param_cov.rows(),
                    config.resample_jitter,
                ))
            } else {
                param_cov
            };
            let mut rng = substream(config.seed, "resample", iteration as u64);
            ensemble = resample(
                &theta_bar,
                &resample_cov,
                model,
                config.ensemble_size,
                &mut rng,
            )?;
        }
    }

    Ok(RunOutcome {
        theta_star,
        trace,
        converged,
    })
}

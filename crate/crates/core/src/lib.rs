//! Bayesian inference for ill-posed inverse problems with soft physics-based
//! constraints.
//!
//! Two inference routes are provided over the same model/constraint
//! abstractions:
//!
//! * [`exact`] — sampling-based posterior estimation: draw from the prior,
//!   weight each sample by the data and constraint likelihoods, and extract
//!   the posterior mean and MAP sample.
//! * [`enkf`] — an iterative ensemble Kalman filter over the augmented
//!   state `[theta; x]`, where constraints enter by reweighing ensemble
//!   members with their constraint likelihood before each resampling step.
//!
//! All numerics are generic over the scalar type via [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); the `*64` aliases at the crate root
//! pin `f64` for ordinary use.

pub mod constraints;
pub mod enkf;
pub mod error;
pub mod exact;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::Error;
pub use scalar::Scalar;

/// `f64` column vector.
pub type Vector64 = stats::Vector<f64>;
/// `f64` dense matrix.
pub type Matrix64 = stats::Matrix<f64>;
/// `f64` Gaussian specification (mean + covariance).
pub type GaussianSpec64 = stats::GaussianSpec<f64>;
/// `f64` constraint term.
pub type ConstraintTerm64 = constraints::ConstraintTerm<f64>;
/// `f64` constraint set.
pub type ConstraintSet64 = constraints::ConstraintSet<f64>;
/// `f64` observation operator.
pub type ObservationOperator64 = model::ObservationOperator<f64>;
/// `f64` prior specification.
pub type PriorSpec64 = exact::PriorSpec<f64>;
/// `f64` data specification.
pub type DataSpec64 = exact::DataSpec<f64>;
/// `f64` EnKF configuration.
pub type EnkfConfig64 = enkf::EnkfConfig<f64>;

//! Error types shared across the inference modules.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A matrix required to be positive definite failed a Cholesky pivot test.
    #[error("matrix is not positive definite (pivot {pivot} at index {index}, threshold {threshold})")]
    NotPositiveDefinite {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    /// Operands have incompatible dimensions.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A weight vector was expected to be normalized but is not.
    #[error("weights do not form a probability vector (sum = {sum})")]
    WeightsNotNormalized { sum: f64 },

    /// Every posterior log weight is -inf; nothing to normalize against.
    #[error("all posterior weights vanished (max log weight = {max_log_weight})")]
    AllWeightsZero { max_log_weight: f64 },

    /// The Kalman innovation matrix H C H^T + Sigma_l is not invertible.
    #[error("singular innovation matrix in Kalman update")]
    SingularInnovation,

    /// A constraint function is undefined at the supplied state.
    #[error("constraint function undefined at the supplied state")]
    ConstraintUndefined,
}

pub type Result<T> = std::result::Result<T, Error>;

//! Forward-model abstraction, linear observation operator, and the built-in
//! two-parameter benchmark model with its multi-modal cost geometry.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{Matrix, Vector};

/// Deterministic map from parameters to states, `x = F(theta)`.
///
/// Implementations must be stateless (or internally synchronized) so
/// evaluations on distinct inputs can run concurrently.
pub trait ForwardModel<T: Scalar>: Send + Sync {
    fn param_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn evaluate(&self, theta: &Vector<T>) -> Vector<T>;
}

/// Linear projection from state space to observed space, `y = H x`.
#[derive(Debug, Clone)]
pub struct ObservationOperator<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> ObservationOperator<T> {
    pub fn new(matrix: Matrix<T>) -> Self {
        Self { matrix }
    }

    pub fn obs_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn state_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn apply(&self, x: &Vector<T>) -> Result<Vector<T>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "observation operator input",
                expected: self.state_dim(),
                actual: x.len(),
            });
        }
        Ok(self.matrix.matvec(x))
    }
}

/// The built-in benchmark: a 2-parameter, 2-state Gaussian-bump model whose
/// scalar output admits one isolated cost minimum at (1,1) and a circle of
/// spurious minima around (-1,-1).
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticModel;

impl SyntheticModel {
    /// The benchmark's 1x2 projection to the scalar output.
    pub fn observation_operator<T: Scalar>() -> ObservationOperator<T> {
        ObservationOperator::new(Matrix::from_rows(&[vec![
            T::from_f64_lossy(-1.5),
            T::from_f64_lossy(-1.0),
        ]]))
    }
}

impl<T: Scalar> ForwardModel<T> for SyntheticModel {
    fn param_dim(&self) -> usize {
        2
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, theta: &Vector<T>) -> Vector<T> {
        assert_eq!(theta.len(), 2, "synthetic model takes 2 parameters");
        let one = T::one();
        let a = theta[0] + one;
        let b = theta[1] + one;
        let c = theta[0] - one;
        let d = theta[1] - one;
        Vector::new(vec![(-a * a - b * b).exp(), (-c * c - d * d).exp()])
    }
}

/// Reconstructed output `H F(theta)`.
pub fn reconstruct_output<T: Scalar>(
    model: &dyn ForwardModel<T>,
    h: &ObservationOperator<T>,
    theta: &Vector<T>,
) -> Result<Vector<T>> {
    h.apply(&model.evaluate(theta))
}

/// Squared data misfit `||observed - H F(theta)||^2`.
pub fn cost_function<T: Scalar>(
    model: &dyn ForwardModel<T>,
    h: &ObservationOperator<T>,
    theta: &Vector<T>,
    observed: &Vector<T>,
) -> Result<T> {
    let y = reconstruct_output(model, h, theta)?;
    if y.len() != observed.len() {
        return Err(Error::DimensionMismatch {
            context: "cost_function observed",
            expected: y.len(),
            actual: observed.len(),
        });
    }
    let r = observed.sub(&y);
    Ok(r.dot(&r))
}

/// Which local-minimum region of the benchmark cost a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimumGroup {
    /// The isolated true minimum at (1, 1).
    GroupI,
    /// The circle of radius sqrt(log 1.5) around (-1, -1).
    GroupII,
    Neither,
}

impl std::fmt::Display for MinimumGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinimumGroup::GroupI => write!(f, "I"),
            MinimumGroup::GroupII => write!(f, "II"),
            MinimumGroup::Neither => write!(f, "Neither"),
        }
    }
}

/// Default tolerance for [`classify_minimum`]; converged estimates land
/// near but not exactly on the Group II circle.
pub const DEFAULT_GROUP_TOL: f64 = 0.1;

/// Classifies a converged benchmark estimate. Group I is checked first.
pub fn classify_minimum<T: Scalar>(theta: &Vector<T>, tol: T) -> MinimumGroup {
    assert!(tol > T::zero());
    let one = T::one();
    let d1 = ((theta[0] - one).powi(2) + (theta[1] - one).powi(2)).sqrt();
    if d1 <= tol {
        return MinimumGroup::GroupI;
    }
    let radius = T::from_f64_lossy(1.5f64.ln().sqrt());
    let d2 = ((theta[0] + one).powi(2) + (theta[1] + one).powi(2)).sqrt();
    if (d2 - radius).abs() <= tol {
        return MinimumGroup::GroupII;
    }
    MinimumGroup::Neither
}

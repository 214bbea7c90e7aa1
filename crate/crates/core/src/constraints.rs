//! Soft constraints on model states, imposed through Gaussian likelihoods.
//!
//! An equality constraint `g(x) = 0` contributes the density of `g(x)`
//! under `N(0, sigma_c^2)`; an inequality `g(x) <= 0` uses the residual
//! `max(0, g(x))`; a disjunction of branches combines branch densities by
//! inclusion-exclusion. Smaller variances enforce the constraint more
//! strictly. Constraints live on states `x`; callers holding parameters
//! compose with a forward model via [`ConstraintSet::log_likelihood_at_theta`].

use std::sync::Arc;

use crate::model::ForwardModel;
use crate::scalar::Scalar;
use crate::stats::{cholesky, normal_logpdf_zero_mean, Matrix, Vector};

/// Scalar constraint function. `None` marks states where the function is
/// undefined (for example, the log of a non-positive state component); such
/// states receive log-likelihood -inf rather than aborting a run.
pub type ConstraintFn<T> = Arc<dyn Fn(&Vector<T>) -> Option<T> + Send + Sync>;

/// Floor applied to the inclusion-exclusion value of a disjunction before
/// taking the log; density values can exceed 1 for small variances and make
/// the combination non-positive.
pub const DISJUNCTION_FLOOR: f64 = 1e-300;

/// One soft constraint term.
#[derive(Clone)]
pub enum ConstraintTerm<T> {
    /// `g(x) = 0` with variance `sigma_c^2 > 0`.
    Equality { g: ConstraintFn<T>, variance: T },
    /// `g(x) <= 0` with variance `sigma_c^2 > 0`.
    Inequality { g: ConstraintFn<T>, variance: T },
    /// `g_1(x) = 0 or g_2(x) = 0 or ...` with a covariance over the
    /// branch residuals (diagonal in the usual case).
    Disjunction {
        branches: Vec<ConstraintFn<T>>,
        cov: Matrix<T>,
    },
}

impl<T> std::fmt::Debug for ConstraintTerm<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintTerm::Equality { .. } => f.write_str("Equality"),
            ConstraintTerm::Inequality { .. } => f.write_str("Inequality"),
            ConstraintTerm::Disjunction { branches, .. } => {
                write!(f, "Disjunction({} branches)", branches.len())
            }
        }
    }
}

/// Evaluation of one term at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermEval<T> {
    pub log_likelihood: T,
    /// Set when a disjunction's inclusion-exclusion value was non-positive
    /// and got floored.
    pub non_positive_disjunction: bool,
}

impl<T: Scalar> ConstraintTerm<T> {
    pub fn equality<F>(g: F, variance: T) -> Self
    where
        F: Fn(&Vector<T>) -> Option<T> + Send + Sync + 'static,
    {
        assert!(variance > T::zero(), "constraint variance must be positive");
        ConstraintTerm::Equality {
            g: Arc::new(g),
            variance,
        }
    }

    pub fn inequality<F>(g: F, variance: T) -> Self
    where
        F: Fn(&Vector<T>) -> Option<T> + Send + Sync + 'static,
    {
        assert!(variance > T::zero(), "constraint variance must be positive");
        ConstraintTerm::Inequality {
            g: Arc::new(g),
            variance,
        }
    }

    /// Disjunction with independent branches (diagonal covariance).
    pub fn disjunction(branches: Vec<ConstraintFn<T>>, variances: Vec<T>) -> Self {
        assert!(branches.len() >= 2, "disjunction needs at least 2 branches");
        assert_eq!(branches.len(), variances.len());
        assert!(variances.iter().all(|&v| v > T::zero()));
        ConstraintTerm::Disjunction {
            branches,
            cov: Matrix::diagonal(&variances),
        }
    }

    /// Raw equality residual `g(x)`.
    pub fn equality_residual(&self, x: &Vector<T>) -> Option<T> {
        match self {
            ConstraintTerm::Equality { g, .. } => g(x),
            _ => panic!("equality_residual on non-equality term"),
        }
    }

    /// Inequality residual `max(0, g(x))`.
    pub fn inequality_residual(&self, x: &Vector<T>) -> Option<T> {
        match self {
            ConstraintTerm::Inequality { g, .. } => g(x).map(|v| v.max(T::zero())),
            _ => panic!("inequality_residual on non-inequality term"),
        }
    }

    /// Log likelihood of the term at state `x`.
    pub fn log_likelihood(&self, x: &Vector<T>) -> TermEval<T> {
        let ok = |log_likelihood| TermEval {
            log_likelihood,
            non_positive_disjunction: false,
        };
        let undefined = TermEval {
            log_likelihood: T::neg_infinity(),
            non_positive_disjunction: false,
        };
        match self {
            ConstraintTerm::Equality { g, variance } => match g(x) {
                Some(r) => ok(normal_logpdf_zero_mean(r, *variance)),
                None => undefined,
            },
            ConstraintTerm::Inequality { g, variance } => match g(x) {
                Some(r) => ok(normal_logpdf_zero_mean(r.max(T::zero()), *variance)),
                None => undefined,
            },
            ConstraintTerm::Disjunction { branches, cov } => {
                let mut residuals = Vec::with_capacity(branches.len());
                for g in branches {
                    match g(x) {
                        Some(r) => residuals.push(r),
                        None => return undefined,
                    }
                }
                disjunction_log_likelihood(&residuals, cov)
            }
        }
    }
}

/// Inclusion-exclusion over all non-empty branch subsets: each subset
/// contributes the joint density of its residuals under the corresponding
/// sub-covariance, with alternating sign. Two branches reduce to
/// `p1 + p2 - p12`.
fn disjunction_log_likelihood<T: Scalar>(residuals: &[T], cov: &Matrix<T>) -> TermEval<T> {
    let k = residuals.len();
    debug_assert!(k >= 2 && cov.rows() == k);
    let mut total = T::zero();
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let m = idx.len();
        let mut sub = Matrix::zeros(m, m);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                sub[(a, b)] = cov[(i, j)];
            }
        }
        let r = Vector::new(idx.iter().map(|&i| residuals[i]).collect());
        let density = match subset_logpdf(&r, &sub) {
            Some(lp) => lp.exp(),
            None => T::zero(), // singular sub-covariance contributes nothing
        };
        let sign = if m % 2 == 1 { T::one() } else { -T::one() };
        total += sign * density;
    }
    let floor = T::from_f64_lossy(DISJUNCTION_FLOOR);
    if total <= T::zero() || total < floor {
        TermEval {
            log_likelihood: floor.ln(),
            non_positive_disjunction: total <= T::zero(),
        }
    } else {
        TermEval {
            log_likelihood: total.ln(),
            non_positive_disjunction: false,
        }
    }
}

fn subset_logpdf<T: Scalar>(r: &Vector<T>, cov: &Matrix<T>) -> Option<T> {
    let l = cholesky(cov).ok()?;
    let n = r.len();
    // forward substitution for L v = r
    let mut v = Vector::zeros(n);
    for i in 0..n {
        let mut acc = r[i];
        for j in 0..i {
            acc = acc - l[(i, j)] * v[j];
        }
        v[i] = acc / l[(i, i)];
    }
    let quad = v.dot(&v);
    let two = T::from_f64_lossy(2.0);
    let log_det = (0..n)
        .map(|i| l[(i, i)].ln())
        .fold(T::zero(), |a, x| a + x)
        * two;
    let nn = T::from_f64_lossy(n as f64);
    Some(-(nn * (two * T::PI()).ln() + log_det + quad) / two)
}

/// Evaluation of a whole constraint set at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetEval<T> {
    pub log_likelihood: T,
    /// Number of disjunction terms whose inclusion-exclusion value was
    /// floored at this state.
    pub non_positive_disjunctions: usize,
}

/// Ordered collection of independent constraint terms; their likelihoods
/// multiply (log likelihoods add). May be empty.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet<T> {
    terms: Vec<ConstraintTerm<T>>,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn new(terms: Vec<ConstraintTerm<T>>) -> Self {
        Self { terms }
    }

    pub fn empty() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[ConstraintTerm<T>] {
        &self.terms
    }

    pub fn push(&mut self, term: ConstraintTerm<T>) {
        self.terms.push(term);
    }

    /// Sum of term log likelihoods at state `x`; 0 for an empty set.
    pub fn log_likelihood(&self, x: &Vector<T>) -> T {
        self.evaluate(x).log_likelihood
    }

    pub fn evaluate(&self, x: &Vector<T>) -> SetEval<T> {
        let mut total = T::zero();
        let mut flags = 0usize;
        for term in &self.terms {
            let eval = term.log_likelihood(x);
            total += eval.log_likelihood;
            if eval.non_positive_disjunction {
                flags += 1;
            }
        }
        SetEval {
            log_likelihood: total,
            non_positive_disjunctions: flags,
        }
    }

    /// Constraint log likelihood at parameters `theta`, composing with the
    /// forward model: `G(F(theta))`.
    pub fn log_likelihood_at_theta(&self, model: &dyn ForwardModel<T>, theta: &Vector<T>) -> T {
        self.log_likelihood(&model.evaluate(theta))
    }
}

/// The benchmark's state-space equality constraint
/// `-0.25 log x1 + 0.25 log x2 - 2 = 0`, undefined where a state component
/// is non-positive. Through the benchmark forward model it is equivalent to
/// `theta1 + theta2 - 2 = 0`.
pub fn synthetic_log_equality<T: Scalar>(variance: T) -> ConstraintTerm<T> {
    ConstraintTerm::equality(
        |x: &Vector<T>| {
            if x[0] <= T::zero() || x[1] <= T::zero() {
                return None;
            }
            let q = T::from_f64_lossy(0.25);
            Some(-q * x[0].ln() + q * x[1].ln() - T::from_f64_lossy(2.0))
        },
        variance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ForwardModel, SyntheticModel};

    type V = Vector<f64>;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn equality_residual_reference_states() {
        let term = synthetic_log_equality(0.5);
        // True parameter (1,1): state (e^-8, 1) satisfies the constraint.
        let x = V::new(vec![(-8.0f64).exp(), 1.0]);
        assert_close(term.equality_residual(&x).unwrap(), 0.0, 1e-12);

        let m = SyntheticModel;
        let x = m.evaluate(&V::new(vec![0.0, 0.0]));
        assert_close(term.equality_residual(&x).unwrap(), -2.0, 1e-12);
        let x = m.evaluate(&V::new(vec![-1.0, -1.0]));
        assert_close(term.equality_residual(&x).unwrap(), -4.0, 1e-12);
    }

    #[test]
    fn equality_residual_undefined_outside_domain() {
        let term = synthetic_log_equality(0.5);
        assert!(term.equality_residual(&V::new(vec![-0.1, 1.0])).is_none());
        assert!(term
            .log_likelihood(&V::new(vec![-0.1, 1.0]))
            .log_likelihood
            .is_infinite());
    }

    #[test]
    fn inequality_residual_clamps_feasible_side() {
        let term = ConstraintTerm::inequality(|x: &V| Some(x[0]), 1.0);
        assert_eq!(term.inequality_residual(&V::new(vec![-1.0])).unwrap(), 0.0);
        assert_eq!(term.inequality_residual(&V::new(vec![0.0])).unwrap(), 0.0);
        assert_eq!(term.inequality_residual(&V::new(vec![1.5])).unwrap(), 1.5);
    }

    #[test]
    fn equality_log_likelihood_peak() {
        let term = ConstraintTerm::equality(|x: &V| Some(x[0]), 0.5);
        let peak = term.log_likelihood(&V::new(vec![0.0])).log_likelihood;
        assert_close(peak, -0.5 * std::f64::consts::PI.ln(), 1e-12);
        assert_close(peak, -0.5724, 1e-4);
    }

    #[test]
    fn equality_maximized_at_zero_residual() {
        let term = ConstraintTerm::equality(|x: &V| Some(x[0]), 0.7);
        let peak = term.log_likelihood(&V::new(vec![0.0])).log_likelihood;
        let mut r = -3.0;
        while r <= 3.0 {
            let v = term.log_likelihood(&V::new(vec![r])).log_likelihood;
            assert!(v <= peak + 1e-15, "residual {r}");
            r += 0.05;
        }
    }

    #[test]
    fn inequality_constant_on_feasible_side() {
        let term = ConstraintTerm::inequality(|x: &V| Some(x[0]), 0.8);
        let base = term.log_likelihood(&V::new(vec![-5.0])).log_likelihood;
        for g in [-3.0, -1.0, -0.01, 0.0] {
            assert_close(
                term.log_likelihood(&V::new(vec![g])).log_likelihood,
                base,
                1e-15,
            );
        }
        // Strictly decreasing on the violation side.
        let mut prev = base;
        for g in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let v = term.log_likelihood(&V::new(vec![g])).log_likelihood;
            assert!(v < prev);
            prev = v;
        }
        // Deep-feasible inequality matches the equality peak value.
        let eq = ConstraintTerm::equality(|x: &V| Some(x[0]), 0.8);
        assert_close(
            term.log_likelihood(&V::new(vec![-5.0])).log_likelihood,
            eq.log_likelihood(&V::new(vec![0.0])).log_likelihood,
            1e-15,
        );
    }

    #[test]
    fn disjunction_one_branch_active() {
        // Residuals (0, 10) with unit variances: p2 and the joint vanish,
        // leaving p1 = 1/sqrt(2 pi).
        let term = ConstraintTerm::disjunction(
            vec![
                Arc::new(|x: &V| Some(x[0])) as ConstraintFn<f64>,
                Arc::new(|x: &V| Some(x[1])) as ConstraintFn<f64>,
            ],
            vec![1.0, 1.0],
        );
        let eval = term.log_likelihood(&V::new(vec![0.0, 10.0]));
        assert!(!eval.non_positive_disjunction);
        assert_close(eval.log_likelihood, (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln(), 1e-6);
        assert_close(eval.log_likelihood.exp(), 0.3989, 1e-4);
    }

    #[test]
    fn disjunction_far_from_all_branches_floors() {
        let term = ConstraintTerm::disjunction(
            vec![
                Arc::new(|x: &V| Some(x[0])) as ConstraintFn<f64>,
                Arc::new(|x: &V| Some(x[1])) as ConstraintFn<f64>,
            ],
            vec![1.0, 1.0],
        );
        let eval = term.log_likelihood(&V::new(vec![60.0, 60.0]));
        assert_close(eval.log_likelihood, DISJUNCTION_FLOOR.ln(), 1e-9);
    }

    #[test]
    fn disjunction_flags_non_positive_combination() {
        // Tiny variances push densities above 1 and the combination can go
        // non-positive when both branches are active at once.
        let term = ConstraintTerm::disjunction(
            vec![
                Arc::new(|x: &V| Some(x[0])) as ConstraintFn<f64>,
                Arc::new(|x: &V| Some(x[0])) as ConstraintFn<f64>,
            ],
            vec![1e-6, 1e-6],
        );
        let eval = term.log_likelihood(&V::new(vec![0.0]));
        // p1 + p2 - p1*p2 with p ~ 400: combination is negative.
        assert!(eval.non_positive_disjunction);
        assert_close(eval.log_likelihood, DISJUNCTION_FLOOR.ln(), 1e-9);
    }

    #[test]
    fn set_log_likelihood_sums_terms() {
        let empty = ConstraintSet::<f64>::empty();
        assert_eq!(empty.log_likelihood(&V::new(vec![1.0])), 0.0);

        let one = ConstraintSet::new(vec![ConstraintTerm::equality(|x: &V| Some(x[0]), 0.5)]);
        let x = V::new(vec![0.3]);
        assert_close(
            one.log_likelihood(&x),
            one.terms()[0].log_likelihood(&x).log_likelihood,
            0.0,
        );

        let two = ConstraintSet::new(vec![
            ConstraintTerm::equality(|x: &V| Some(x[0]), 0.5),
            ConstraintTerm::equality(|x: &V| Some(x[0] - 2.0), 0.5),
        ]);
        // Residuals 0 and -2 at x = 0: peak + (peak - 4).
        let peak = -0.5 * std::f64::consts::PI.ln();
        assert_close(two.log_likelihood(&V::new(vec![0.0])), 2.0 * peak - 4.0, 1e-12);
        assert_close(two.log_likelihood(&V::new(vec![0.0])), -0.5724 - 4.5724, 1e-3);
    }

    #[test]
    fn large_variance_makes_constraint_inert() {
        let term = synthetic_log_equality(1e8);
        let m = SyntheticModel;
        let a = term
            .log_likelihood(&m.evaluate(&V::new(vec![1.0, 1.0])))
            .log_likelihood;
        let b = term
            .log_likelihood(&m.evaluate(&V::new(vec![-2.0, 0.5])))
            .log_likelihood;
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn synthetic_constraint_matches_theta_space_oracle() {
        // Through F, the constraint is theta1 + theta2 - 2 exactly.
        let term = synthetic_log_equality(0.5);
        let m = SyntheticModel;
        for i in -6..=6 {
            for j in -6..=6 {
                let t = V::new(vec![i as f64 * 0.5, j as f64 * 0.5]);
                let r = term.equality_residual(&m.evaluate(&t)).unwrap();
                assert_close(r, t[0] + t[1] - 2.0, 1e-9);
            }
        }
    }

    #[test]
    fn synthetic_constraint_maximized_on_ridge() {
        // Grid scan over [-3,3]^2: the best grid point lies on theta1+theta2=2.
        let set = ConstraintSet::new(vec![synthetic_log_equality(0.5)]);
        let m = SyntheticModel;
        let mut best = f64::NEG_INFINITY;
        let mut best_t = (0.0, 0.0);
        for i in -12..=12 {
            for j in -12..=12 {
                let t = V::new(vec![i as f64 * 0.25, j as f64 * 0.25]);
                let v = set.log_likelihood_at_theta(&m, &t);
                if v > best {
                    best = v;
                    best_t = (t[0], t[1]);
                }
            }
        }
        assert_close(best_t.0 + best_t.1, 2.0, 1e-9);
    }
}

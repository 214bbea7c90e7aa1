//! Dense linear algebra and Gaussian kernels used by every inference module.
//!
//! The problems targeted here are small (a handful of parameters and states),
//! so the implementation favors clarity and exact reproducibility over
//! performance: plain row-major storage, unblocked Cholesky, sequential
//! index-order reductions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative pivot tolerance for positive-(semi)definiteness tests,
/// scaled by the matrix trace.
const PSD_REL_TOL: f64 = 1e-12;

/// Dense column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T> {
    entries: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn new(entries: Vec<T>) -> Self {
        Self { entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self::new(
            self.iter()
                .zip(other.iter())
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        Self::new(
            self.iter()
                .zip(other.iter())
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.iter().map(|&a| a * s).collect())
    }

    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len());
        self.iter()
            .zip(other.iter())
            .map(|(&a, &b)| a * b)
            .fold(T::zero(), |acc, v| acc + v)
    }

    pub fn norm2(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.iter()
            .map(|v| v.abs())
            .fold(T::zero(), |acc, v| acc.max(v))
    }

    /// Stacks `self` on top of `other`.
    pub fn stack(&self, other: &Self) -> Self {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Self::new(entries)
    }

    /// Copies out the sub-vector `[start, start+len)`.
    pub fn segment(&self, start: usize, len: usize) -> Self {
        Self::new(self.entries[start..start + len].to_vec())
    }
}

impl<T: Scalar> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.entries[i]
    }
}

impl<T: Scalar> std::ops::IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.entries[i]
    }
}

impl<T: Scalar> From<Vec<T>> for Vector<T> {
    fn from(entries: Vec<T>) -> Self {
        Self::new(entries)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row slices; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .fold(T::zero(), |acc, v| acc + v)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = Vector::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = T::zero();
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|&a| a * a)
            .fold(T::zero(), |acc, v| acc + v)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), |acc, v| acc.max(v))
    }

    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(T::one());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extracts the block with top-left corner `(row, col)`.
    pub fn block(&self, row: usize, col: usize, nrows: usize, ncols: usize) -> Self {
        let mut out = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                out[(i, j)] = self[(row + i, col + j)];
            }
        }
        out
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

fn pivot_threshold<T: Scalar>(m: &Matrix<T>) -> T {
    T::from_f64_lossy(PSD_REL_TOL) * m.trace().abs()
}

/// Cholesky factorization `m = L L^T` for symmetric positive-definite `m`.
///
/// Pivots must exceed `1e-12 * trace(m)`; smaller pivots raise
/// [`Error::NotPositiveDefinite`].
pub fn cholesky<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    cholesky_impl(m, false)
}

/// Cholesky-like factorization for positive *semi*-definite matrices.
///
/// Pivots within `-1e-12 * trace` of zero are clamped to zero and their
/// column skipped, so rank-deficient covariances (including the zero
/// matrix) factor without error. Pivots below the negative tolerance
/// still raise [`Error::NotPositiveDefinite`].
pub fn cholesky_psd<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    cholesky_impl(m, true)
}

fn cholesky_impl<T: Scalar>(m: &Matrix<T>, allow_semidefinite: bool) -> Result<Matrix<T>> {
    assert!(m.is_square(), "cholesky of non-square matrix");
    let n = m.rows();
    let tol = pivot_threshold(m);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot = pivot - l[(j, k)] * l[(j, k)];
        }
        let failed = if allow_semidefinite {
            pivot < -tol
        } else {
            pivot <= tol || pivot <= T::zero()
        };
        if failed || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: pivot.to_f64().unwrap_or(f64::NAN),
                threshold: tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        if allow_semidefinite && pivot <= tol.max(T::zero()) {
            // Rank deficiency: zero pivot, column contributes nothing.
            continue;
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc = acc - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / diag;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
fn forward_substitution<T: Scalar>(l: &Matrix<T>, b: &Vector<T>) -> Vector<T> {
    let n = l.rows();
    let mut y = Vector::zeros(n);
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc = acc - l[(i, j)] * y[j];
        }
        y[i] = acc / l[(i, i)];
    }
    y
}

/// Solves `L^T x = y` for lower-triangular `L`.
fn backward_substitution<T: Scalar>(l: &Matrix<T>, y: &Vector<T>) -> Vector<T> {
    let n = l.rows();
    let mut x = Vector::zeros(n);
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in (i + 1)..n {
            acc = acc - l[(j, i)] * x[j];
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

/// Solves `m x = b` for symmetric positive-definite `m` via Cholesky.
pub fn solve_spd<T: Scalar>(m: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>> {
    let l = cholesky(m)?;
    Ok(backward_substitution(&l, &forward_substitution(&l, b)))
}

/// Mean and covariance of a multivariate Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec<T> {
    mean: Vector<T>,
    cov: Matrix<T>,
}

impl<T: Scalar> GaussianSpec<T> {
    /// Validates symmetry (1e-12 relative) and positive semi-definiteness
    /// (Cholesky pivots no worse than `-1e-12 * trace`).
    pub fn new(mean: Vector<T>, cov: Matrix<T>) -> Result<Self> {
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "GaussianSpec mean/cov",
                expected: mean.len(),
                actual: cov.rows(),
            });
        }
        if !cov.is_symmetric(T::from_f64_lossy(1e-12)) {
            return Err(Error::NotPositiveDefinite {
                index: 0,
                pivot: f64::NAN,
                threshold: 1e-12,
            });
        }
        cholesky_psd(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    /// Univariate spec from scalar mean and variance.
    pub fn scalar(mean: T, variance: T) -> Result<Self> {
        Self::new(
            Vector::new(vec![mean]),
            Matrix::from_rows(&[vec![variance]]),
        )
    }
}

/// Draws `count` independent samples `mean + L xi` with `xi` standard normal.
///
/// Degenerate (zero or rank-deficient) covariances are handled exactly:
/// the null directions contribute nothing, so a zero matrix yields the
/// mean every time. Standard normals are consumed in index order, one
/// block of `dim` per draw, so results are seed-deterministic.
pub fn mvn_sample<T: Scalar, R: Rng>(
    spec: &GaussianSpec<T>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vector<T>>> {
    let l = cholesky_psd(spec.cov())?;
    let n = spec.dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let xi = Vector::new(
            (0..n)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(rng);
                    T::from_f64_lossy(v)
                })
                .collect(),
        );
        out.push(spec.mean().add(&l.matvec(&xi)));
    }
    Ok(out)
}

/// Log density of a multivariate Gaussian at `point`.
///
/// Computed as `-(n log 2pi + log|cov| + r^T cov^-1 r) / 2` through the
/// Cholesky factor; requires a strictly positive-definite covariance.
pub fn mvn_logpdf<T: Scalar>(point: &Vector<T>, spec: &GaussianSpec<T>) -> Result<T> {
    if point.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: "mvn_logpdf point",
            expected: spec.dim(),
            actual: point.len(),
        });
    }
    let l = cholesky(spec.cov())?;
    let r = point.sub(spec.mean());
    let v = forward_substitution(&l, &r);
    let quad = v.dot(&v);
    let log_det = (0..spec.dim())
        .map(|i| l[(i, i)].ln())
        .fold(T::zero(), |acc, x| acc + x)
        * T::from_f64_lossy(2.0);
    let n = T::from_f64_lossy(spec.dim() as f64);
    let two = T::from_f64_lossy(2.0);
    Ok(-(n * (two * T::PI()).ln() + log_det + quad) / two)
}

/// Log density of a univariate Gaussian with mean zero.
pub fn normal_logpdf_zero_mean<T: Scalar>(residual: T, variance: T) -> T {
    let two = T::from_f64_lossy(2.0);
    -((two * T::PI() * variance).ln() + residual * residual / variance) / two
}

fn check_weights<T: Scalar>(points: &[Vector<T>], weights: &Vector<T>) -> Result<()> {
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "weights vs points",
            expected: points.len(),
            actual: weights.len(),
        });
    }
    let dim = points.first().map_or(0, |p| p.len());
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "point dimensions",
                expected: dim,
                actual: p.len(),
            });
        }
    }
    let mut sum = T::zero();
    for &w in weights.iter() {
        if w < T::zero() {
            return Err(Error::WeightsNotNormalized {
                sum: w.to_f64().unwrap_or(f64::NAN),
            });
        }
        sum += w;
    }
    // 1e-12 for f64; scaled up when the accumulation itself is coarser.
    let tol = T::from_f64_lossy(1e-12)
        .max(T::epsilon() * T::from_f64_lossy(8.0 * weights.len().max(1) as f64));
    if (sum - T::one()).abs() > tol {
        return Err(Error::WeightsNotNormalized {
            sum: sum.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Weighted mean of a set of points; weights must form a probability vector.
pub fn weighted_mean<T: Scalar>(points: &[Vector<T>], weights: &Vector<T>) -> Result<Vector<T>> {
    check_weights(points, weights)?;
    let dim = points.first().map_or(0, |p| p.len());
    let mut mean = Vector::zeros(dim);
    for (p, &w) in points.iter().zip(weights.iter()) {
        for i in 0..dim {
            mean[i] += w * p[i];
        }
    }
    Ok(mean)
}

/// Weighted covariance about a supplied mean; symmetric PSD by construction.
pub fn weighted_covariance<T: Scalar>(
    points: &[Vector<T>],
    weights: &Vector<T>,
    mean: &Vector<T>,
) -> Result<Matrix<T>> {
    check_weights(points, weights)?;
    let dim = mean.len();
    let mut cov = Matrix::zeros(dim, dim);
    for (p, &w) in points.iter().zip(weights.iter()) {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "weighted_covariance point vs mean",
                expected: dim,
                actual: p.len(),
            });
        }
        let r = p.sub(mean);
        for i in 0..dim {
            for j in i..dim {
                cov[(i, j)] += w * r[i] * r[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(cov)
}

/// Normalizes log weights into a probability vector via max-subtracted
/// exponentiation. Sequential index-order summation keeps results
/// independent of caller parallelism.
pub fn normalize_log_weights<T: Scalar>(log_weights: &[T]) -> Result<Vector<T>> {
    let max = log_weights
        .iter()
        .fold(T::neg_infinity(), |acc, &v| acc.max(v));
    if !max.is_finite() {
        return Err(Error::AllWeightsZero {
            max_log_weight: max.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut w: Vec<T> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let sum = w.iter().fold(T::zero(), |acc, &v| acc + v);
    for v in &mut w {
        *v = *v / sum;
    }
    Ok(Vector::new(w))
}

/// Effective sample size `1 / sum(w^2)` of a normalized weight vector.
pub fn effective_sample_size<T: Scalar>(weights: &Vector<T>) -> T {
    let s = weights.iter().map(|&w| w * w).fold(T::zero(), |a, v| a + v);
    if s == T::zero() {
        T::zero()
    } else {
        T::one() / s
    }
}

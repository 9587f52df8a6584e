//! Small dense linear-algebra helpers shared by the flow and the tracker.
//!
//! Particle sets are stored column-wise: a `DMatrix` with one row per state
//! component and one column per particle.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Relative eigenvalue floor applied by [`regularize_covariance`].
pub const EIGEN_FLOOR_REL: f64 = 1e-9;
/// Absolute eigenvalue floor, used when the covariance is identically zero.
pub const EIGEN_FLOOR_ABS: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes `cov` and lifts every eigenvalue below
/// `max(1e-9 · trace / dim, 1e-12)` to that floor.
pub fn regularize_covariance(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = cov.nrows();
    if dim == 0 {
        return cov.clone();
    }
    let sym = symmetrize(cov);
    let floor = (EIGEN_FLOOR_REL * sym.trace() / dim as f64).max(EIGEN_FLOOR_ABS);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&ev| ev >= floor) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|ev| ev.max(floor));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clamped) * v.transpose()))
}

/// Weighted mean and covariance of a column-wise particle set. The weights
/// need not be normalized but must have a positive sum.
pub fn weighted_moments(
    particles: &DMatrix<f64>,
    weights: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = particles.ncols();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            context: "weighted_moments",
            expected: n,
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let dim = particles.nrows();
    let mut mean = DVector::zeros(dim);
    for (col, &w) in particles.column_iter().zip(weights) {
        mean.axpy(w / total, &col, 1.0);
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut d = DVector::zeros(dim);
    for (col, &w) in particles.column_iter().zip(weights) {
        d.copy_from(&col);
        d -= &mean;
        cov.ger(w / total, &d, &d, 1.0);
    }
    Ok((mean, cov))
}

/// A multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "Gaussian::new",
                expected: mean.len(),
                found: cov.nrows(),
            });
        }
        let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite("Gaussian covariance"))?;
        let log_det: f64 = chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| 2.0 * libm::log(*d))
            .sum();
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + log_det);
        Ok(Self {
            mean,
            chol,
            log_norm,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Squared Mahalanobis distance of the point given as a slice.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let mut d = DVector::from_column_slice(x);
        d -= &self.mean;
        self.chol.l_dirty().solve_lower_triangular_mut(&mut d);
        d.norm_squared()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    /// Squared Mahalanobis distances of every column of `particles`.
    pub fn mahalanobis_sq_columns(&self, particles: &DMatrix<f64>) -> alloc::vec::Vec<f64> {
        let mut centered = particles.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        // Only the lower triangle of the factor is meaningful.
        let l = self.chol.l_dirty().lower_triangle();
        l.solve_lower_triangular_mut(&mut centered);
        centered.column_iter().map(|c| c.norm_squared()).collect()
    }
}

/// Index of the largest value, the smallest index winning ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

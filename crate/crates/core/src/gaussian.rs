//! Multivariate Gaussian log-density evaluation and sampling.
//!
//! Everything goes through a Cholesky factor of the covariance. Factorization
//! failure is reported, not regularized: feasible parameters are positive
//! definite by construction, so a failure here means a bounds violation
//! upstream.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Lower-triangular Cholesky factor of a covariance matrix, with the
/// covariance log-determinant cached.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
    log_det: f64,
}

impl CholeskyFactor {
    pub fn from_covariance(covariance: &DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != covariance.ncols() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let chol = nalgebra::Cholesky::new(covariance.clone()).ok_or(Error::NotPositiveDefinite)?;
        let lower = chol.unpack();
        let log_det = 2.0 * (0..lower.nrows()).map(|j| lower[(j, j)].ln()).sum::<f64>();
        Ok(Self { lower, log_det })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Log-determinant of the covariance, `2 * sum(log L_jj)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `L y = v` in place.
    pub(crate) fn forward_solve(&self, v: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.lower[(i, j)] * v[j];
            }
            v[i] = acc / self.lower[(i, i)];
        }
    }

    /// Solves `L^T y = v` in place.
    pub(crate) fn backward_solve_transpose(&self, v: &mut [f64]) {
        let d = self.dim();
        for i in (0..d).rev() {
            let mut acc = v[i];
            for j in (i + 1)..d {
                acc -= self.lower[(j, i)] * v[j];
            }
            v[i] = acc / self.lower[(i, i)];
        }
    }

    /// Buffered log-density kernel; `buf` must have length `dim`.
    pub(crate) fn log_density(&self, x: &[f64], mean: &[f64], buf: &mut [f64]) -> f64 {
        let d = self.dim();
        for j in 0..d {
            buf[j] = x[j] - mean[j];
        }
        self.forward_solve(buf);
        let quad: f64 = buf.iter().map(|z| z * z).sum();
        -0.5 * (d as f64 * LN_2PI + self.log_det + quad)
    }
}

/// Log-density of `N(mean, Sigma)` at `x`, with `Sigma = L L^T` given by the
/// factor.
pub fn log_gaussian_density(x: &[f64], mean: &[f64], chol: &CholeskyFactor) -> Result<f64> {
    let d = chol.dim();
    if x.len() != d || mean.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "x has length {}, mean {}, factor dimension {}",
            x.len(),
            mean.len(),
            d
        )));
    }
    let mut buf = vec![0.0; d];
    Ok(chol.log_density(x, mean, &mut buf))
}

/// One draw from `N(mean, L L^T)`: `mean + L z` with `z` standard normal.
pub fn sample_gaussian<R: Rng + ?Sized>(
    mean: &[f64],
    chol: &CholeskyFactor,
    rng: &mut R,
) -> Vec<f64> {
    let d = chol.dim();
    assert_eq!(mean.len(), d, "mean length must match factor dimension");
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = mean.to_vec();
    let lower = chol.lower();
    for i in 0..d {
        for (j, zj) in z.iter().enumerate().take(i + 1) {
            out[i] += lower[(i, j)] * zj;
        }
    }
    out
}

//! Contrast-level quantities of a fitted mixture: responsibilities, observed
//! log-likelihood, assignment entropy, the conditional classification
//! log-likelihood, the label version of the classification log-likelihood,
//! the MAP rule and the entropy kernel `h`.
//!
//! Responsibilities and the entropy are computed from log-space quantities
//! throughout (log-sum-exp stabilization, entropy from log-responsibilities),
//! and every per-observation sum runs in fixed index order so values are
//! bit-stable regardless of the worker count.

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussian::CholeskyFactor;
use crate::model::{LabelMatrix, MixtureParams};
use crate::parallel;

/// `t log t := 0` below this threshold, honoring `h(0) = 0` without NaN.
const H_ZERO_THRESHOLD: f64 = 1e-300;

/// The entropy kernel `h(t) = -t log t`, with `h(0) = 0`.
pub fn h(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfUnitInterval(t));
    }
    Ok(h_unchecked(t))
}

#[inline]
fn h_unchecked(t: f64) -> f64 {
    if t <= H_ZERO_THRESHOLD {
        0.0
    } else {
        -t * t.ln()
    }
}

/// `h_K(t) = sum_k h(t_k)` over a probability vector; zero iff the vector is
/// an indicator, maximal at the uniform vector where it equals `log K`.
pub fn h_k(t: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &v in t {
        total += h(v)?;
    }
    Ok(total)
}

/// Observed log-likelihood, entropy and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastValues {
    /// `log L`.
    pub log_lik: f64,
    /// `Ent >= 0`, at most `n log K`.
    pub entropy: f64,
    /// `log L - Ent`.
    pub lcc: f64,
}

/// Per-observation component responsibilities with their log-space cache.
#[derive(Debug, Clone)]
pub struct ResponsibilityMatrix {
    n: usize,
    k: usize,
    /// Row-major n-by-K posterior probabilities; rows sum to 1.
    tau: Vec<f64>,
    /// Row-major n-by-K cache of `log pi_k + log phi(x_i; omega_k)`.
    log_joint: Vec<f64>,
    /// Per-row log-sum-exp of the cache, i.e. `log f(x_i)`.
    log_norm: Vec<f64>,
}

impl ResponsibilityMatrix {
    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.tau[i * self.k..(i + 1) * self.k]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.tau[i * self.k + k]
    }

    /// Flat row-major view of all responsibilities.
    pub fn values(&self) -> &[f64] {
        &self.tau
    }

    /// `log pi_k + log phi(x_i; omega_k)`.
    pub fn log_joint(&self, i: usize, k: usize) -> f64 {
        self.log_joint[i * self.k + k]
    }

    /// `log tau_ik`, computed as log-joint minus log-sum-exp.
    pub fn log_value(&self, i: usize, k: usize) -> f64 {
        self.log_joint[i * self.k + k] - self.log_norm[i]
    }

    /// `log f(x_i)` under the mixture.
    pub fn log_density(&self, i: usize) -> f64 {
        self.log_norm[i]
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_norm.iter().sum()
    }

    /// Entropy contribution of row `i`.
    pub fn row_entropy(&self, i: usize) -> f64 {
        let mut ent = 0.0;
        for k in 0..self.k {
            let tau = self.value(i, k);
            if tau > H_ZERO_THRESHOLD {
                ent -= tau * self.log_value(i, k);
            }
        }
        ent
    }

    pub fn entropy(&self) -> f64 {
        (0..self.n).map(|i| self.row_entropy(i)).sum()
    }

    pub fn contrast_values(&self) -> ContrastValues {
        let log_lik = self.log_likelihood();
        let entropy = self.entropy();
        ContrastValues {
            log_lik,
            entropy,
            lcc: log_lik - entropy,
        }
    }

    /// MAP labels; exact ties go to the smallest component index.
    pub fn map_labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (k, &t) in row.iter().enumerate() {
                    if t > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// `sum_i log tau_{i, z(i)}` at the MAP labels `z`; the label-based
    /// correction used by the hard-assignment selection criterion.
    pub fn map_assignment_log_prob(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (k, &t) in row.iter().enumerate() {
                    if t > row[best] {
                        best = k;
                    }
                }
                self.log_value(i, best)
            })
            .sum()
    }
}

pub(crate) struct MixtureEvaluator {
    pub log_weights: Vec<f64>,
    pub factors: Vec<CholeskyFactor>,
    pub means: Vec<Vec<f64>>,
    dim: usize,
}

impl MixtureEvaluator {
    pub(crate) fn new(params: &MixtureParams) -> Result<Self> {
        if params.weights().iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParams(
                "responsibilities need strictly positive weights".into(),
            ));
        }
        let log_weights = params.weights().iter().map(|w| w.ln()).collect();
        let factors = params
            .components()
            .iter()
            .map(|c| CholeskyFactor::from_covariance(&c.covariance))
            .collect::<Result<Vec<_>>>()?;
        let means = params
            .components()
            .iter()
            .map(|c| c.mean.iter().cloned().collect())
            .collect();
        Ok(Self {
            log_weights,
            factors,
            means,
            dim: params.dim(),
        })
    }

    /// Fills `log pi_k + log phi(x; omega_k)` for one observation.
    pub(crate) fn log_joint_row(&self, x: &[f64], out: &mut [f64], buf: &mut [f64]) {
        for k in 0..self.log_weights.len() {
            out[k] = self.log_weights[k] + self.factors[k].log_density(x, &self.means[k], buf);
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_inputs(params: &MixtureParams, data: &DataMatrix) -> Result<()> {
    if params.dim() != data.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "parameters have dimension {}, data has {} columns",
            params.dim(),
            data.n_cols()
        )));
    }
    data.check_finite()
}

/// Posterior component probabilities for every observation, via log-sum-exp.
pub fn responsibilities(params: &MixtureParams, data: &DataMatrix) -> Result<ResponsibilityMatrix> {
    check_inputs(params, data)?;
    let eval = MixtureEvaluator::new(params)?;
    let n = data.n_rows();
    let k = params.n_components();

    let ranges = parallel::chunk_ranges(n);
    let parts = parallel::map_collect(ranges.len(), |c| {
        let range = ranges[c].clone();
        let rows = range.len();
        let mut tau = vec![0.0; rows * k];
        let mut log_joint = vec![0.0; rows * k];
        let mut log_norm = vec![0.0; rows];
        let mut buf = vec![0.0; eval.dim()];
        for (local, i) in range.enumerate() {
            let lj = &mut log_joint[local * k..(local + 1) * k];
            eval.log_joint_row(data.row(i), lj, &mut buf);
            let lse = log_sum_exp(lj);
            log_norm[local] = lse;
            for (t, l) in tau[local * k..(local + 1) * k].iter_mut().zip(lj.iter()) {
                *t = (l - lse).exp();
            }
        }
        (tau, log_joint, log_norm)
    });

    let mut tau = Vec::with_capacity(n * k);
    let mut log_joint = Vec::with_capacity(n * k);
    let mut log_norm = Vec::with_capacity(n);
    for (t, lj, ln) in parts {
        tau.extend_from_slice(&t);
        log_joint.extend_from_slice(&lj);
        log_norm.extend_from_slice(&ln);
    }
    Ok(ResponsibilityMatrix {
        n,
        k,
        tau,
        log_joint,
        log_norm,
    })
}

/// Observed log-likelihood `sum_i log sum_k pi_k phi(x_i; omega_k)`.
pub fn log_likelihood(params: &MixtureParams, data: &DataMatrix) -> Result<f64> {
    Ok(responsibilities(params, data)?.log_likelihood())
}

/// Assignment entropy `-sum_i sum_k tau_ik log tau_ik`, in `[0, n log K]`.
pub fn entropy(params: &MixtureParams, data: &DataMatrix) -> Result<f64> {
    Ok(responsibilities(params, data)?.entropy())
}

/// Log-likelihood, entropy and their difference in one pass.
pub fn conditional_classification_loglik(
    params: &MixtureParams,
    data: &DataMatrix,
) -> Result<ContrastValues> {
    Ok(responsibilities(params, data)?.contrast_values())
}

/// Complete-data log-likelihood at hard labels:
/// `sum_i sum_k Z_ik (log pi_k + log phi(x_i; omega_k))`.
pub fn classification_loglik(
    params: &MixtureParams,
    data: &DataMatrix,
    labels: &LabelMatrix,
) -> Result<f64> {
    check_inputs(params, data)?;
    if labels.len() != data.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} observations",
            labels.len(),
            data.n_rows()
        )));
    }
    if labels.n_components() != params.n_components() {
        return Err(Error::DimensionMismatch(format!(
            "labels cover {} components, parameters have {}",
            labels.n_components(),
            params.n_components()
        )));
    }
    let eval = MixtureEvaluator::new(params)?;
    let mut buf = vec![0.0; eval.dim()];
    let mut total = 0.0;
    for (i, &z) in labels.labels().iter().enumerate() {
        total += eval.log_weights[z]
            + eval.factors[z].log_density(data.row(i), &eval.means[z], &mut buf);
    }
    Ok(total)
}

/// MAP classification; ties break to the smallest component index.
pub fn map_classify(params: &MixtureParams, data: &DataMatrix) -> Result<Vec<usize>> {
    Ok(responsibilities(params, data)?.map_labels())
}

/// The weighted contrast `alpha * log L - (1 - alpha) * Ent`; interpolates
/// from pure assignment confidence at 0 to the plain likelihood at 1 and is
/// proportional to `log L - Ent` at 1/2.
pub fn weighted_contrast(alpha: f64, params: &MixtureParams, data: &DataMatrix) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let values = conditional_classification_loglik(params, data)?;
    Ok(alpha * values.log_lik - (1.0 - alpha) * values.entropy)
}

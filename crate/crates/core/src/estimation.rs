//! Fitting by two contrasts: the maximum-likelihood estimate via EM, and the
//! maximum conditional-classification-likelihood estimate via projected
//! gradient ascent warm-started from the EM solution.
//!
//! Both estimators share the seeded multi-restart scheme. Restart `r` draws
//! its stream from `derive_seed(seed, r)` and the best-of-restarts reduction
//! breaks exact ties by restart index, so a fit is bit-reproducible for any
//! worker count.

use crate::contrast::{conditional_classification_loglik, responsibilities, ContrastValues};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::model::{
    project_to_bounds, Component, CovarianceStructure, MixtureParams, ModelSpec, Proportions,
};
use crate::parallel;
use crate::reparam::Reparameterization;
use crate::rng::{derive_seed, rng_from_seed};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Initialization of an EM restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Dirichlet(1,...,1) responsibility rows followed by one M-step.
    RandomResponsibilities,
    /// k-means++ centers, hard nearest-center assignment, one M-step.
    KMeansPlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Mle,
    Mlcce,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Mlcce => "mlcce",
        }
    }
}

/// Restart, iteration and tolerance settings shared by both estimators.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub n_restarts: usize,
    pub max_em_iters: usize,
    /// Relative change of the log-likelihood that stops EM.
    pub em_tol: f64,
    pub max_grad_iters: usize,
    /// Sup-norm of the reparameterized gradient that stops the polish.
    pub grad_tol: f64,
    pub seed: u64,
    pub init_scheme: InitScheme,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_restarts: 10,
            max_em_iters: 500,
            em_tol: 1e-8,
            max_grad_iters: 200,
            grad_tol: 1e-6,
            seed: 0,
            init_scheme: InitScheme::KMeansPlusPlus,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 || self.max_em_iters == 0 || self.max_grad_iters == 0 {
            return Err(Error::InvalidConfig(
                "restart and iteration counts must be at least 1".into(),
            ));
        }
        if !(self.em_tol > 0.0 && self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// A fitted mixture with its contrast values and restart provenance.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: MixtureParams,
    pub contrast: ContrastValues,
    /// `sum_i log tau_{i, z(i)}` at the MAP labels; input to the
    /// hard-assignment selection criterion.
    pub map_assignment_log_prob: f64,
    pub converged: bool,
    pub n_iters: usize,
    pub restart_index: usize,
    pub estimator: Estimator,
}

/// Gradient of the conditional classification log-likelihood in the family's
/// unconstrained coordinates, at strictly interior parameters.
pub fn lcc_gradient(
    params: &MixtureParams,
    data: &DataMatrix,
    spec: &ModelSpec,
) -> Result<Vec<f64>> {
    let chart = Reparameterization::new(&spec.family, params.n_components(), params.dim())?;
    let coords = chart.encode(params)?;
    chart.lcc_gradient(&coords, data)
}

/// Maximum-likelihood fit: best-of-restarts EM.
pub fn fit_mle_em(data: &DataMatrix, spec: &ModelSpec, config: &FitConfig) -> Result<FitResult> {
    Ok(fit_both(data, spec, config)?.0)
}

/// Maximum conditional-classification-likelihood fit: each restart runs EM to
/// a local MLE, then ascends the contrast by projected gradient with
/// backtracking; the final contrast never drops below its EM start.
pub fn fit_mlcce(data: &DataMatrix, spec: &ModelSpec, config: &FitConfig) -> Result<FitResult> {
    Ok(fit_both(data, spec, config)?.1)
}

/// Runs both estimators on one set of restarts. The first element is the MLE
/// (best restart by log-likelihood), the second the MLccE (best restart by
/// the conditional classification log-likelihood after the polish).
pub fn fit_both(
    data: &DataMatrix,
    spec: &ModelSpec,
    config: &FitConfig,
) -> Result<(FitResult, FitResult)> {
    config.validate()?;
    spec.family.validate(spec.n_components, spec.dim_data)?;
    if data.n_cols() != spec.dim_data {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, model expects {}",
            data.n_cols(),
            spec.dim_data
        )));
    }
    data.check_finite()?;
    if data.n_rows() < spec.n_components {
        return Err(Error::TooFewObservations {
            n: data.n_rows(),
            k: spec.n_components,
        });
    }
    if data.is_constant() {
        return Err(Error::DegenerateData);
    }

    let runs = parallel::map_collect(config.n_restarts, |r| -> Result<(EmRun, PolishRun)> {
        let em = em_single_run(data, spec, config, derive_seed(config.seed, r as u64))?;
        let polish = polish_lcc(data, spec, &em.params, config)?;
        Ok((em, polish))
    });
    let mut restarts = Vec::with_capacity(config.n_restarts);
    for run in runs {
        restarts.push(run?);
    }

    let mut best_mle = 0;
    let mut best_mlcce = 0;
    for r in 1..restarts.len() {
        if restarts[r].0.log_lik > restarts[best_mle].0.log_lik {
            best_mle = r;
        }
        if restarts[r].1.lcc > restarts[best_mlcce].1.lcc {
            best_mlcce = r;
        }
    }

    let mle = {
        let em = &restarts[best_mle].0;
        build_result(
            data,
            spec,
            em.params.clone(),
            em.converged,
            em.iters,
            best_mle,
            Estimator::Mle,
        )?
    };
    let mlcce = {
        let (em, polish) = &restarts[best_mlcce];
        build_result(
            data,
            spec,
            polish.params.clone(),
            em.converged && polish.converged,
            em.iters + polish.iters,
            best_mlcce,
            Estimator::Mlcce,
        )?
    };
    Ok((mle, mlcce))
}

fn build_result(
    data: &DataMatrix,
    spec: &ModelSpec,
    params: MixtureParams,
    converged: bool,
    n_iters: usize,
    restart_index: usize,
    estimator: Estimator,
) -> Result<FitResult> {
    let resp = responsibilities(&params, data)?;
    Ok(FitResult {
        spec: spec.clone(),
        params,
        contrast: resp.contrast_values(),
        map_assignment_log_prob: resp.map_assignment_log_prob(),
        converged,
        n_iters,
        restart_index,
        estimator,
    })
}

pub(crate) struct EmRun {
    pub params: MixtureParams,
    pub log_lik: f64,
    pub iters: usize,
    pub converged: bool,
    #[cfg_attr(not(test), allow(dead_code))]
    pub ll_trace: Vec<f64>,
    /// Per M-step: whether the bounds projection moved the raw moments.
    #[cfg_attr(not(test), allow(dead_code))]
    pub clamp_trace: Vec<bool>,
}

pub(crate) fn em_single_run(
    data: &DataMatrix,
    spec: &ModelSpec,
    config: &FitConfig,
    seed: u64,
) -> Result<EmRun> {
    let mut rng = rng_from_seed(seed);
    let n = data.n_rows();
    let k = spec.n_components;

    let tau0 = match config.init_scheme {
        InitScheme::RandomResponsibilities => random_responsibilities(n, k, &mut rng),
        InitScheme::KMeansPlusPlus => kmeans_pp_responsibilities(data, k, &mut rng),
    };
    let (mut params, _, _) = m_step(data, spec, &tau0)?;

    let mut ll_prev = f64::NEG_INFINITY;
    let mut ll_trace = Vec::new();
    let mut clamp_trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let mut rescues = 0;
    let collapse_floor = 1e-8 * n as f64;

    for t in 0..config.max_em_iters {
        iters = t + 1;
        let resp = responsibilities(&params, data)?;
        let ll = resp.log_likelihood();
        ll_trace.push(ll);
        if t > 0 && (ll - ll_prev).abs() / ll.abs().max(1.0) < config.em_tol {
            converged = true;
            break;
        }
        ll_prev = ll;

        let (new_params, clamped, n_k) = m_step(data, spec, resp.values())?;
        clamp_trace.push(clamped);
        params = new_params;

        let collapsed: Vec<usize> = n_k
            .iter()
            .enumerate()
            .filter(|(_, &m)| m < collapse_floor)
            .map(|(idx, _)| idx)
            .collect();
        if !collapsed.is_empty() {
            if rescues >= 3 {
                converged = false;
                break;
            }
            rescues += 1;
            params = rescue_components(data, spec, &params, &collapsed, &mut rng)?;
        }
    }

    let log_lik = crate::contrast::log_likelihood(&params, data)?;
    Ok(EmRun {
        params,
        log_lik,
        iters,
        converged,
        ll_trace,
        clamp_trace,
    })
}

fn random_responsibilities<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut tau = vec![0.0; n * k];
    for row in tau.chunks_exact_mut(k) {
        let mut total = 0.0;
        for t in row.iter_mut() {
            *t = -rng.random::<f64>().max(1e-300).ln();
            total += *t;
        }
        for t in row.iter_mut() {
            *t /= total;
        }
    }
    tau
}

fn kmeans_pp_responsibilities<R: Rng + ?Sized>(
    data: &DataMatrix,
    k: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = data.n_rows();
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.row(i), data.row(centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for i in 0..n {
            dist2[i] = dist2[i].min(squared_distance(data.row(i), data.row(next)));
        }
    }

    let mut tau = vec![0.0; n * k];
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &center) in centers.iter().enumerate() {
            let d2 = squared_distance(data.row(i), data.row(center));
            if d2 < best_d {
                best_d = d2;
                best = c;
            }
        }
        tau[i * k + best] = 1.0;
    }
    tau
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Weighted moment updates followed by the bounds projection. Returns the
/// projected parameters, whether the projection moved anything, and the
/// per-component responsibility masses.
fn m_step(
    data: &DataMatrix,
    spec: &ModelSpec,
    tau: &[f64],
) -> Result<(MixtureParams, bool, Vec<f64>)> {
    let n = data.n_rows();
    let k = spec.n_components;
    let d = spec.dim_data;
    debug_assert_eq!(tau.len(), n * k);

    let (n_k, sum_x) = parallel::fold_chunks(
        n,
        |range| {
            let mut n_k = vec![0.0; k];
            let mut sum_x = vec![0.0; k * d];
            for i in range {
                let x = data.row(i);
                for ck in 0..k {
                    let t = tau[i * k + ck];
                    n_k[ck] += t;
                    for j in 0..d {
                        sum_x[ck * d + j] += t * x[j];
                    }
                }
            }
            (n_k, sum_x)
        },
        |(mut a1, mut a2), (b1, b2)| {
            for (x, y) in a1.iter_mut().zip(&b1) {
                *x += y;
            }
            for (x, y) in a2.iter_mut().zip(&b2) {
                *x += y;
            }
            (a1, a2)
        },
    )
    .expect("data has rows");

    let n_k_safe: Vec<f64> = n_k.iter().map(|&m| m.max(1e-300)).collect();
    let mut means = vec![0.0; k * d];
    for ck in 0..k {
        for j in 0..d {
            let (lo, hi) = spec.family.bounds.mean_box[j];
            means[ck * d + j] = (sum_x[ck * d + j] / n_k_safe[ck]).clamp(lo, hi);
        }
    }

    let full = spec.family.structure == CovarianceStructure::Full;
    let scatter_len = if full { k * d * d } else { k * d };
    let scatter = parallel::fold_chunks(
        n,
        |range| {
            let mut s = vec![0.0; scatter_len];
            for i in range {
                let x = data.row(i);
                for ck in 0..k {
                    let t = tau[i * k + ck];
                    if full {
                        for a in 0..d {
                            let da = x[a] - means[ck * d + a];
                            for b in 0..d {
                                let db = x[b] - means[ck * d + b];
                                s[ck * d * d + a * d + b] += t * da * db;
                            }
                        }
                    } else {
                        for j in 0..d {
                            let dj = x[j] - means[ck * d + j];
                            s[ck * d + j] += t * dj * dj;
                        }
                    }
                }
            }
            s
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        },
    )
    .expect("data has rows");

    let weights = match spec.family.proportions {
        Proportions::Free => n_k.iter().map(|&m| m / n as f64).collect(),
        Proportions::Equal => vec![1.0 / k as f64; k],
    };

    let mut components = Vec::with_capacity(k);
    match spec.family.structure {
        CovarianceStructure::Spherical => {
            for ck in 0..k {
                let v =
                    (0..d).map(|j| scatter[ck * d + j]).sum::<f64>() / (n_k_safe[ck] * d as f64);
                components.push(Component::new(
                    DVector::from_column_slice(&means[ck * d..(ck + 1) * d]),
                    DMatrix::from_diagonal_element(d, d, v),
                ));
            }
        }
        CovarianceStructure::Diagonal => {
            for ck in 0..k {
                let diag =
                    DVector::from_iterator(d, (0..d).map(|j| scatter[ck * d + j] / n_k_safe[ck]));
                components.push(Component::new(
                    DVector::from_column_slice(&means[ck * d..(ck + 1) * d]),
                    DMatrix::from_diagonal(&diag),
                ));
            }
        }
        CovarianceStructure::DiagonalEqualVolume => {
            // shared-volume update: shape_k = W_k / det(W_k)^{1/d},
            // volume = sum_k det(W_k)^{1/d} / n
            let root_dets: Vec<f64> = (0..k)
                .map(|ck| {
                    let log_det: f64 = (0..d).map(|j| scatter[ck * d + j].max(1e-300).ln()).sum();
                    (log_det / d as f64).exp()
                })
                .collect();
            let volume = root_dets.iter().sum::<f64>() / n as f64;
            for ck in 0..k {
                let diag = DVector::from_iterator(
                    d,
                    (0..d).map(|j| volume * scatter[ck * d + j].max(1e-300) / root_dets[ck]),
                );
                components.push(Component::new(
                    DVector::from_column_slice(&means[ck * d..(ck + 1) * d]),
                    DMatrix::from_diagonal(&diag),
                ));
            }
        }
        CovarianceStructure::Full => {
            for ck in 0..k {
                let mut cov = DMatrix::zeros(d, d);
                for a in 0..d {
                    for b in 0..d {
                        cov[(a, b)] = scatter[ck * d * d + a * d + b] / n_k_safe[ck];
                    }
                }
                components.push(Component::new(
                    DVector::from_column_slice(&means[ck * d..(ck + 1) * d]),
                    cov,
                ));
            }
        }
    }

    let raw = MixtureParams::new_unchecked(weights, components);
    let projected = project_to_bounds(&raw, &spec.family)?;
    let clamped = projected != raw;
    Ok((projected, clamped, n_k))
}

/// Re-seeds collapsed components at a random observation with a data-scaled
/// covariance and an even share of the weight mass.
fn rescue_components<R: Rng + ?Sized>(
    data: &DataMatrix,
    spec: &ModelSpec,
    params: &MixtureParams,
    collapsed: &[usize],
    rng: &mut R,
) -> Result<MixtureParams> {
    let k = params.n_components();
    let d = params.dim();
    let global_diag =
        DVector::from_iterator(d, (0..d).map(|j| data.column_variance(j).max(1e-300)));

    let mut weights = params.weights().to_vec();
    let mut components = params.components().to_vec();
    for &ck in collapsed {
        let row = data.row(rng.random_range(0..data.n_rows()));
        components[ck] = Component::new(
            DVector::from_column_slice(row),
            DMatrix::from_diagonal(&global_diag),
        );
        let others: f64 = weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ck)
            .map(|(_, w)| w)
            .sum();
        let target = 1.0 - 1.0 / k as f64;
        if others > 0.0 {
            let scale = target / others;
            for (i, w) in weights.iter_mut().enumerate() {
                if i != ck {
                    *w *= scale;
                }
            }
        }
        weights[ck] = 1.0 / k as f64;
    }
    project_to_bounds(
        &MixtureParams::new_unchecked(weights, components),
        &spec.family,
    )
}

pub(crate) struct PolishRun {
    pub params: MixtureParams,
    pub lcc: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Projected gradient ascent on the conditional classification
/// log-likelihood, warm-started at `start`. Tracks the best projected point
/// seen (including the start), so the returned contrast never drops below the
/// start value.
pub(crate) fn polish_lcc(
    data: &DataMatrix,
    spec: &ModelSpec,
    start: &MixtureParams,
    config: &FitConfig,
) -> Result<PolishRun> {
    const ARMIJO: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 40;

    let chart = Reparameterization::new(&spec.family, spec.n_components, spec.dim_data)?;
    let mut best_params = start.clone();
    let mut best_lcc = conditional_classification_loglik(start, data)?.lcc;

    let mut x = chart.encode_clamped(start);
    let mut f = conditional_classification_loglik(&chart.decode(&x)?, data)?.lcc;
    let mut converged = false;
    let mut iters = 0;

    for t in 0..config.max_grad_iters {
        iters = t + 1;
        let grad = chart.lcc_gradient(&x, data)?;
        let sup: f64 = grad.iter().fold(0.0, |acc, g| acc.max(g.abs()));
        if sup < config.grad_tol {
            converged = true;
            break;
        }
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        // equality at float resolution counts as acceptable
        let slack = 1e-9 * f.abs().max(1.0);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi).collect();
            let candidate = project_to_bounds(&chart.decode(&trial)?, &spec.family)?;
            let f_new = conditional_classification_loglik(&candidate, data)?.lcc;
            if f_new >= f + ARMIJO * step * grad_sq - slack {
                accepted = Some((candidate, f_new));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, f_new)) = accepted else {
            converged = false;
            break;
        };
        if f_new > best_lcc {
            best_lcc = f_new;
            best_params = candidate.clone();
        }
        let stalled = f_new - f < 1e-8 * f.abs().max(1.0);
        x = chart.encode_clamped(&candidate);
        f = f_new;
        if stalled {
            // relative improvement below resolution; converged in the ftol sense
            converged = true;
            break;
        }
    }

    Ok(PolishRun {
        params: best_params,
        lcc: best_lcc,
        iters,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bounds, ModelFamily};
    use crate::sim::sample_mixture;

    fn sample_for_tests(truth: &MixtureParams, n: usize, seed: u64) -> DataMatrix {
        sample_mixture(truth, n, &mut rng_from_seed(seed)).unwrap()
    }

    fn spec_1d(structure: CovarianceStructure, proportions: Proportions, k: usize) -> ModelSpec {
        let bounds = Bounds {
            prop_floor: 1e-3,
            var_floor: 1e-4,
            var_ceil: 1e4,
            mean_box: vec![(-50.0, 50.0)],
        };
        ModelSpec::new(ModelFamily::new(structure, proportions, bounds), k, 1).unwrap()
    }

    fn quick_config(seed: u64) -> FitConfig {
        FitConfig {
            n_restarts: 3,
            seed,
            ..FitConfig::default()
        }
    }

    #[test]
    fn k1_em_is_one_clamped_moment_step() {
        let data = DataMatrix::from_column(vec![0.4, -1.2, 2.0, 0.9, -0.3, 1.6]).unwrap();
        let spec = spec_1d(CovarianceStructure::Full, Proportions::Free, 1);
        let fit = fit_mle_em(&data, &spec, &quick_config(1)).unwrap();
        let mean = data.column_mean(0);
        let var = data.column_variance(0);
        assert!((fit.params.components()[0].mean[0] - mean).abs() < 1e-10);
        assert!((fit.params.components()[0].covariance[(0, 0)] - var).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn em_recovers_well_separated_components() {
        let truth = MixtureParams::univariate(&[(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)]).unwrap();
        let data = sample_for_tests(&truth, 2000, 7);
        let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
        let fit = fit_mle_em(&data, &spec, &quick_config(2)).unwrap();
        let mut means: Vec<f64> = fit.params.components().iter().map(|c| c.mean[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] + 5.0).abs() < 0.2, "means {means:?}");
        assert!((means[1] - 5.0).abs() < 0.2);
        for w in fit.params.weights() {
            assert!((w - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn em_log_likelihood_is_monotone_without_clamps() {
        let mut checked = 0;
        for instance in 0..50 {
            let truth = MixtureParams::univariate(&[
                (0.4, -1.5, 0.8),
                (0.6, 1.0 + (instance % 5) as f64 * 0.3, 1.2),
            ])
            .unwrap();
            let data = sample_for_tests(&truth, 120, 100 + instance);
            let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
            let run = em_single_run(
                &data,
                &spec,
                &FitConfig::default(),
                derive_seed(instance, 0),
            )
            .unwrap();
            for t in 0..run.ll_trace.len().saturating_sub(1) {
                if !run.clamp_trace[t] {
                    assert!(
                        run.ll_trace[t + 1] >= run.ll_trace[t] - 1e-10,
                        "instance {instance}: ll dropped {} -> {}",
                        run.ll_trace[t],
                        run.ll_trace[t + 1]
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 100, "too few unclamped iterations exercised");
    }

    #[test]
    fn mlcce_k1_coincides_with_mle() {
        let data = DataMatrix::from_column(vec![0.1, 0.8, -0.9, 1.4, -0.2, 0.5]).unwrap();
        let spec = spec_1d(CovarianceStructure::Spherical, Proportions::Free, 1);
        let (mle, mlcce) = fit_both(&data, &spec, &quick_config(3)).unwrap();
        assert!(
            (mle.params.components()[0].mean[0] - mlcce.params.components()[0].mean[0]).abs()
                < 1e-10
        );
        assert!(
            (mle.params.components()[0].covariance[(0, 0)]
                - mlcce.params.components()[0].covariance[(0, 0)])
                .abs()
                < 1e-10
        );
        assert!((mle.contrast.lcc - mlcce.contrast.lcc).abs() < 1e-10);
    }

    #[test]
    fn mlcce_matches_mle_on_well_separated_data() {
        let truth = MixtureParams::univariate(&[(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)]).unwrap();
        let data = sample_for_tests(&truth, 1000, 11);
        let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
        let (mle, mlcce) = fit_both(&data, &spec, &quick_config(4)).unwrap();
        let sort = |p: &MixtureParams| {
            let mut triples: Vec<(f64, f64, f64)> = p
                .weights()
                .iter()
                .zip(p.components())
                .map(|(w, c)| (c.mean[0], *w, c.covariance[(0, 0)]))
                .collect();
            triples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            triples
        };
        for (a, b) in sort(&mle.params).iter().zip(sort(&mlcce.params)) {
            assert!((a.0 - b.0).abs() < 1e-3, "means {} vs {}", a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-3);
            assert!((a.2 - b.2).abs() < 1e-3);
        }
    }

    #[test]
    fn mlcce_lcc_dominates_mle_lcc() {
        for instance in 0..12 {
            let truth = MixtureParams::univariate(&[
                (0.5, -1.0, 1.0),
                (0.5, 1.0 + 0.2 * instance as f64, 1.0),
            ])
            .unwrap();
            let data = sample_for_tests(&truth, 300, 40 + instance);
            let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
            let (mle, mlcce) = fit_both(&data, &spec, &quick_config(instance)).unwrap();
            assert!(
                mlcce.contrast.lcc >= mle.contrast.lcc - 1e-9,
                "instance {instance}: {} < {}",
                mlcce.contrast.lcc,
                mle.contrast.lcc
            );
            assert_eq!(mle.estimator, Estimator::Mle);
            assert_eq!(mlcce.estimator, Estimator::Mlcce);
        }
    }

    #[test]
    fn mlcce_recovers_population_pair_on_standard_normal_data() {
        // the population-best symmetric pair for a standard normal is at
        // |mu| ~ 0.83, var ~ 0.31; the fit should land near it at n = 5000
        let truth = MixtureParams::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let data = sample_for_tests(&truth, 5000, 1234);
        let bounds = Bounds::from_data(&data).unwrap();
        let spec = ModelSpec::new(
            ModelFamily::new(CovarianceStructure::Spherical, Proportions::Equal, bounds),
            2,
            1,
        )
        .unwrap();
        let config = FitConfig {
            n_restarts: 6,
            seed: 99,
            ..FitConfig::default()
        };
        let fit = fit_mlcce(&data, &spec, &config).unwrap();
        for comp in fit.params.components() {
            assert!(
                (comp.mean[0].abs() - 0.83).abs() < 0.1,
                "|mean| = {}",
                comp.mean[0].abs()
            );
            assert!(
                (comp.covariance[(0, 0)] - 0.31).abs() < 0.1,
                "variance = {}",
                comp.covariance[(0, 0)]
            );
        }
        assert!(fit.params.components()[0].mean[0] * fit.params.components()[1].mean[0] < 0.0);
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
        let tiny = DataMatrix::from_column(vec![1.0]).unwrap();
        assert!(matches!(
            fit_mle_em(&tiny, &spec, &quick_config(0)),
            Err(Error::TooFewObservations { .. })
        ));
        let constant = DataMatrix::from_column(vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        assert!(matches!(
            fit_mle_em(&constant, &spec, &quick_config(0)),
            Err(Error::DegenerateData)
        ));
    }

    #[test]
    fn public_gradient_rejects_boundary_params() {
        let data = DataMatrix::from_column(vec![-0.5, 0.2, 0.9, 1.4]).unwrap();
        let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 1);
        let interior = MixtureParams::univariate(&[(1.0, 0.3, 0.8)]).unwrap();
        let grad = lcc_gradient(&interior, &data, &spec).unwrap();
        assert_eq!(grad.len(), spec.dimension());
        // variance pinned at the floor has no finite chart coordinate
        let pinned = MixtureParams::univariate(&[(1.0, 0.3, 1e-4)]).unwrap();
        assert!(matches!(
            lcc_gradient(&pinned, &data, &spec),
            Err(Error::OnBoundary)
        ));
    }

    #[test]
    fn fits_are_deterministic_per_seed() {
        let truth = MixtureParams::univariate(&[(0.3, -2.0, 1.0), (0.7, 2.0, 1.5)]).unwrap();
        let data = sample_for_tests(&truth, 400, 13);
        let spec = spec_1d(CovarianceStructure::Full, Proportions::Free, 2);
        let a = fit_both(&data, &spec, &quick_config(5)).unwrap();
        let b = fit_both(&data, &spec, &quick_config(5)).unwrap();
        assert_eq!(a.0.params, b.0.params);
        assert_eq!(a.1.params, b.1.params);
        assert_eq!(
            a.0.contrast.log_lik.to_bits(),
            b.0.contrast.log_lik.to_bits()
        );
        assert_eq!(a.1.contrast.lcc.to_bits(), b.1.contrast.lcc.to_bits());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn fits_are_identical_across_thread_counts() {
        let truth = MixtureParams::univariate(&[(0.4, -1.0, 0.6), (0.6, 1.5, 1.1)]).unwrap();
        let data = sample_for_tests(&truth, 500, 17);
        let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
        let config = quick_config(6);
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        let a = pool1.install(|| fit_both(&data, &spec, &config)).unwrap();
        let b = pool8.install(|| fit_both(&data, &spec, &config)).unwrap();
        assert_eq!(a.0.params, b.0.params);
        assert_eq!(a.1.params, b.1.params);
        assert_eq!(
            a.0.contrast.log_lik.to_bits(),
            b.0.contrast.log_lik.to_bits()
        );
        assert_eq!(
            a.1.contrast.entropy.to_bits(),
            b.1.contrast.entropy.to_bits()
        );
    }

    #[test]
    fn returned_params_respect_family_bounds() {
        let truth = MixtureParams::univariate(&[(0.9, 0.0, 1.0), (0.1, 0.4, 1.0)]).unwrap();
        let data = sample_for_tests(&truth, 200, 23);
        let spec = spec_1d(CovarianceStructure::Diagonal, Proportions::Free, 2);
        let (mle, mlcce) = fit_both(&data, &spec, &quick_config(9)).unwrap();
        for fit in [&mle, &mlcce] {
            let projected = project_to_bounds(&fit.params, &spec.family).unwrap();
            assert_eq!(projected, fit.params, "{:?}", fit.estimator);
        }
    }
}

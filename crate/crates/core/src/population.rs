//! Population-level expected contrast under a known 1-d sampling density,
//! by quadrature, and its minimization over small parameter grids.
//!
//! The expected contrast of parameters `theta` under a density `f0` is
//! `E[-log f(X; theta)] + E[h_K(tau(X; theta))]`: the cross-entropy part plus
//! the expected assignment uncertainty. Minimizing it over a family gives the
//! population-best parameters and, across component counts, the
//! population-best number of classes.

use nalgebra::DMatrix;

use crate::contrast::log_sum_exp;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussian::LN_2PI;
use crate::model::{MixtureParams, ModelSpec};
use crate::parallel;

/// Analytic description of a sampling density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    variant: DensityVariant,
    params: MixtureParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityVariant {
    Gaussian,
    GaussianMixture,
}

impl DensitySpec {
    pub fn gaussian_1d(mean: f64, variance: f64) -> Result<Self> {
        Ok(Self {
            variant: DensityVariant::Gaussian,
            params: MixtureParams::univariate(&[(1.0, mean, variance)])?,
        })
    }

    pub fn standard_normal() -> Self {
        Self::gaussian_1d(0.0, 1.0).expect("unit variance is valid")
    }

    pub fn mixture(params: MixtureParams) -> Self {
        let variant = if params.n_components() == 1 {
            DensityVariant::Gaussian
        } else {
            DensityVariant::GaussianMixture
        };
        Self { variant, params }
    }

    pub fn variant(&self) -> DensityVariant {
        self.variant
    }

    pub fn params(&self) -> &MixtureParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(
                "population quadrature handles 1-d densities only".into(),
            ));
        }
        Ok(())
    }

    /// Density value at a scalar point; 1-d only.
    pub fn density_1d(&self, x: f64) -> f64 {
        self.params
            .weights()
            .iter()
            .zip(self.params.components())
            .map(|(w, c)| {
                let m = c.mean[0];
                let v = c.covariance[(0, 0)];
                w * (-0.5 * (LN_2PI + v.ln() + (x - m).powi(2) / v)).exp()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Gauss-Hermite nodes translated and scaled per component of the
    /// sampling density; weights absorb the density.
    GaussHermiteTransformed,
    /// Composite trapezoid on a truncated window; the integrand keeps the
    /// explicit density factor.
    TrapezoidTruncated,
}

/// Nodes and positive weights of a 1-d integration rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Trapezoid window and node count, kept for refinement.
    window: Option<(f64, f64, usize)>,
    /// Gauss-Hermite order per component, kept for refinement.
    order: Option<usize>,
}

impl QuadratureRule {
    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn trapezoid(a: f64, b: f64, n_nodes: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) || n_nodes < 2 {
            return Err(Error::InvalidConfig(format!(
                "trapezoid window [{a}, {b}] with {n_nodes} nodes"
            )));
        }
        let h = (b - a) / (n_nodes - 1) as f64;
        let nodes: Vec<f64> = (0..n_nodes).map(|i| a + i as f64 * h).collect();
        let weights: Vec<f64> = (0..n_nodes)
            .map(|i| {
                if i == 0 || i == n_nodes - 1 {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect();
        Ok(Self {
            kind: QuadratureKind::TrapezoidTruncated,
            nodes,
            weights,
            window: Some((a, b, n_nodes)),
            order: None,
        })
    }

    /// The default rule: 201 trapezoid nodes over `[-10, 10]`, where
    /// standard-normal-scale tail mass is below `1e-22`.
    pub fn default_trapezoid() -> Self {
        Self::trapezoid(-10.0, 10.0, 201).expect("static window is valid")
    }

    /// Trapezoid window adapted to the sampling density: every component mean
    /// padded by ten standard deviations, spacing at most `0.05` times the
    /// smallest component standard deviation.
    pub fn trapezoid_for(f0: &DensitySpec) -> Result<Self> {
        f0.require_1d()?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut min_sd = f64::INFINITY;
        for c in f0.params().components() {
            let sd = c.covariance[(0, 0)].sqrt();
            lo = lo.min(c.mean[0] - 10.0 * sd);
            hi = hi.max(c.mean[0] + 10.0 * sd);
            min_sd = min_sd.min(sd);
        }
        let spacing = 0.05 * min_sd;
        let n_nodes = (((hi - lo) / spacing).ceil() as usize + 1).max(201);
        Self::trapezoid(lo, hi, n_nodes)
    }

    /// Transformed Gauss-Hermite rule of the given order per component of
    /// `f0`; the weights absorb the mixture weights and the normalization.
    pub fn gauss_hermite(f0: &DensitySpec, order: usize) -> Result<Self> {
        f0.require_1d()?;
        if order < 2 {
            return Err(Error::InvalidConfig(
                "Gauss-Hermite order must be >= 2".into(),
            ));
        }
        let (t, w) = hermite_nodes(order);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut nodes = Vec::with_capacity(order * f0.params().n_components());
        let mut weights = Vec::with_capacity(order * f0.params().n_components());
        for (alpha, c) in f0.params().weights().iter().zip(f0.params().components()) {
            let mean = c.mean[0];
            let sd = c.covariance[(0, 0)].sqrt();
            for i in 0..order {
                nodes.push(mean + std::f64::consts::SQRT_2 * sd * t[i]);
                weights.push(alpha * w[i] / sqrt_pi);
            }
        }
        Ok(Self {
            kind: QuadratureKind::GaussHermiteTransformed,
            nodes,
            weights,
            window: None,
            order: Some(order),
        })
    }

    /// The same rule at doubled resolution.
    fn refined(&self, f0: &DensitySpec) -> Result<Self> {
        match self.kind {
            QuadratureKind::TrapezoidTruncated => {
                let (a, b, n) = self.window.expect("trapezoid rules carry a window");
                Self::trapezoid(a, b, 2 * n - 1)
            }
            QuadratureKind::GaussHermiteTransformed => {
                Self::gauss_hermite(f0, 2 * self.order.expect("rules carry an order"))
            }
        }
    }
}

/// Nodes and weights of the physicists' Gauss-Hermite rule, by eigendecomposition
/// of the Jacobi matrix.
fn hermite_nodes(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(order, order);
    for i in 1..order {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let weight = sqrt_pi * eig.eigenvectors[(0, i)].powi(2);
            (node, weight)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Per-component 1-d evaluation cache for the integrand.
struct Contrast1d {
    log_weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl Contrast1d {
    fn new(params: &MixtureParams) -> Result<Self> {
        if params.dim() != 1 {
            return Err(Error::Unsupported(
                "population quadrature handles 1-d parameters only".into(),
            ));
        }
        if params.weights().iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParams(
                "population contrast needs strictly positive weights".into(),
            ));
        }
        Ok(Self {
            log_weights: params.weights().iter().map(|w| w.ln()).collect(),
            means: params.components().iter().map(|c| c.mean[0]).collect(),
            variances: params
                .components()
                .iter()
                .map(|c| c.covariance[(0, 0)])
                .collect(),
        })
    }

    /// `-log f(x) + h_K(tau(x))`.
    fn integrand(&self, x: f64, buf: &mut Vec<f64>) -> f64 {
        let k = self.log_weights.len();
        buf.clear();
        for i in 0..k {
            let v = self.variances[i];
            buf.push(
                self.log_weights[i] - 0.5 * (LN_2PI + v.ln() + (x - self.means[i]).powi(2) / v),
            );
        }
        let lse = log_sum_exp(buf);
        let mut ent = 0.0;
        for &lj in buf.iter() {
            let log_tau = lj - lse;
            let tau = log_tau.exp();
            if tau > 1e-300 {
                ent -= tau * log_tau;
            }
        }
        -lse + ent
    }
}

fn evaluate_rule(rule: &QuadratureRule, f0: &DensitySpec, contrast: &Contrast1d) -> f64 {
    let mut buf = Vec::new();
    match rule.kind {
        QuadratureKind::TrapezoidTruncated => rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * f0.density_1d(x) * contrast.integrand(x, &mut buf))
            .sum(),
        QuadratureKind::GaussHermiteTransformed => rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * contrast.integrand(x, &mut buf))
            .sum(),
    }
}

/// Expected contrast `E_f0[-log f(X; params) + h_K(tau(X; params))]` under the
/// given rule. The rule is re-evaluated at doubled resolution; a shift of
/// `1e-6` or more reports the rule as too coarse.
pub fn expected_contrast(
    f0: &DensitySpec,
    params: &MixtureParams,
    rule: &QuadratureRule,
) -> Result<f64> {
    f0.require_1d()?;
    let contrast = Contrast1d::new(params)?;
    let coarse = evaluate_rule(rule, f0, &contrast);
    let fine = evaluate_rule(&rule.refined(f0)?, f0, &contrast);
    if (fine - coarse).abs() >= 1e-6 {
        return Err(Error::RuleTooCoarse((fine - coarse).abs()));
    }
    Ok(coarse)
}

/// Quadrature evaluation without the refinement gate; the checked entry point
/// is [`expected_contrast`].
pub fn raw_quadrature(
    f0: &DensitySpec,
    params: &MixtureParams,
    rule: &QuadratureRule,
) -> Result<f64> {
    f0.require_1d()?;
    let contrast = Contrast1d::new(params)?;
    Ok(evaluate_rule(rule, f0, &contrast))
}

/// Cartesian parameter grid over `(mu, variance)`.
#[derive(Debug, Clone)]
pub struct PopulationGrid {
    pub mu: Vec<f64>,
    pub variance: Vec<f64>,
}

impl PopulationGrid {
    pub fn new(mu: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || variance.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if variance.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidConfig(
                "grid variances must be positive".into(),
            ));
        }
        Ok(Self { mu, variance })
    }

    fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let count = ((hi - lo) / step).round() as usize;
        (0..=count).map(|i| lo + i as f64 * step).collect()
    }

    /// `mu` from 0 to 2 and variance from 0.05 to 2, both in steps of 0.01.
    pub fn default_standard() -> Self {
        Self {
            mu: Self::steps(0.0, 2.0, 0.01),
            variance: Self::steps(0.05, 2.0, 0.01),
        }
    }

    /// Grid scaled to the sampling density's spread.
    pub fn for_density(f0: &DensitySpec) -> Result<Self> {
        f0.require_1d()?;
        let mut mu_max: f64 = 2.0;
        let mut var_max: f64 = 2.0;
        let mut total_var = 0.0;
        let mut mean = 0.0;
        for (w, c) in f0.params().weights().iter().zip(f0.params().components()) {
            let sd = c.covariance[(0, 0)].sqrt();
            mu_max = mu_max.max(c.mean[0].abs() + 2.0 * sd);
            mean += w * c.mean[0];
            total_var += w * (c.covariance[(0, 0)] + c.mean[0].powi(2));
        }
        total_var -= mean.powi(2);
        var_max = var_max.max(1.5 * total_var);
        let var_step = ((var_max - 0.05) / 400.0).max(0.01);
        Ok(Self {
            mu: Self::steps(0.0, mu_max, 0.01),
            variance: Self::steps(0.05, var_max, var_step),
        })
    }
}

/// The two population families the grid engine covers: a single Gaussian, or
/// the symmetric equal-weight pair `(N(-mu, v) + N(mu, v)) / 2`.
fn grid_params(k: usize, mu: f64, variance: f64) -> Result<MixtureParams> {
    match k {
        1 => MixtureParams::univariate(&[(1.0, mu, variance)]),
        2 => MixtureParams::univariate(&[(0.5, -mu, variance), (0.5, mu, variance)]),
        _ => Err(Error::Unsupported(format!(
            "population grids cover K = 1 and the symmetric pair K = 2, got K = {k}"
        ))),
    }
}

/// Scans the grid for the population-best `(mu, variance)` of the model's
/// family, optionally polishing with a Nelder-Mead pass, and returns the
/// canonical representative with `mu >= 0` plus the minimized value.
pub fn minimize_expected_contrast(
    f0: &DensitySpec,
    model: &ModelSpec,
    grid: &PopulationGrid,
    refine: bool,
) -> Result<(MixtureParams, f64)> {
    f0.require_1d()?;
    if model.dim_data != 1 {
        return Err(Error::Unsupported("population grids are 1-d".into()));
    }
    if grid.mu.is_empty() || grid.variance.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let k = model.n_components;
    grid_params(k, grid.mu[0], grid.variance[0])?;

    // dense trapezoid with the density factor baked into the weights; the
    // same nodes serve every grid cell
    let scan_rule = QuadratureRule::trapezoid_for(f0)?;
    let nodes = scan_rule.nodes().to_vec();
    let eff_weights: Vec<f64> = nodes
        .iter()
        .zip(scan_rule.weights())
        .map(|(&x, &w)| w * f0.density_1d(x))
        .collect();
    let cell_value = |mu: f64, variance: f64| -> f64 {
        let params = match grid_params(k, mu, variance) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let contrast = match Contrast1d::new(&params) {
            Ok(c) => c,
            Err(_) => return f64::INFINITY,
        };
        let mut buf = Vec::with_capacity(k);
        nodes
            .iter()
            .zip(&eff_weights)
            .map(|(&x, &w)| w * contrast.integrand(x, &mut buf))
            .sum()
    };

    let n_var = grid.variance.len();
    let values = parallel::map_collect(grid.mu.len() * n_var, |idx| {
        cell_value(grid.mu[idx / n_var], grid.variance[idx % n_var])
    });
    let mut best_idx = 0;
    for (idx, v) in values.iter().enumerate() {
        if *v < values[best_idx] {
            best_idx = idx;
        }
    }
    let mut best_mu = grid.mu[best_idx / n_var];
    let mut best_var = grid.variance[best_idx % n_var];

    if refine {
        let objective = |x: &[f64]| cell_value(x[0], x[1].exp());
        let polished = nelder_mead(&objective, &[best_mu, best_var.ln()], 0.02, 200);
        best_mu = polished[0];
        best_var = polished[1].exp();
    }
    best_mu = best_mu.abs();

    let params = grid_params(k, best_mu, best_var)?;
    let value = expected_contrast(f0, &params, &QuadratureRule::trapezoid_for(f0)?)?;
    Ok((params, value))
}

/// Smallest K minimizing the per-K population contrast.
pub fn population_k0(
    f0: &DensitySpec,
    specs: &[ModelSpec],
    grid: &PopulationGrid,
) -> Result<usize> {
    if specs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best_k = 0;
    let mut best_value = f64::INFINITY;
    for spec in specs {
        let (_, value) = minimize_expected_contrast(f0, spec, grid, true)?;
        if value < best_value {
            best_value = value;
            best_k = spec.n_components;
        }
    }
    Ok(best_k)
}

/// Plain Nelder-Mead with standard coefficients; deterministic, no restarts.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], scale: f64, iters: usize) -> Vec<f64> {
    let dim = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..iters {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if (values[dim] - values[0]).abs() < 1e-12 * (1.0 + values[0].abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = (0..dim)
            .map(|j| centroid[j] + (centroid[j] - worst[j]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[0] {
            let expand: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[dim] = expand;
                values[dim] = f_expand;
            } else {
                simplex[dim] = reflect;
                values[dim] = f_reflect;
            }
        } else if f_reflect < values[dim - 1] {
            simplex[dim] = reflect;
            values[dim] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[dim] {
                simplex[dim] = contract;
                values[dim] = f_contract;
            } else {
                for i in 1..=dim {
                    for j in 0..dim {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    simplex[best].clone()
}

/// Empirical mean of `-Lcc/n` on a sample; Monte Carlo cross-check companion
/// to [`expected_contrast`].
pub fn empirical_contrast(params: &MixtureParams, data: &DataMatrix) -> Result<(f64, f64)> {
    let resp = crate::contrast::responsibilities(params, data)?;
    let n = data.n_rows();
    let per_obs: Vec<f64> = (0..n)
        .map(|i| -resp.log_density(i) + resp.row_entropy(i))
        .collect();
    let mean = per_obs.iter().sum::<f64>() / n as f64;
    let var = per_obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std_err = (var / n as f64).sqrt();
    Ok((mean, std_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bounds, CovarianceStructure, ModelFamily, Proportions};
    use crate::rng::rng_from_seed;
    use crate::sim::sample_mixture;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    const HALF_LOG_2PI_E: f64 = 1.4189385332046727;

    fn spec_k(k: usize) -> ModelSpec {
        let bounds = Bounds {
            prop_floor: 1e-3,
            var_floor: 1e-6,
            var_ceil: 1e6,
            mean_box: vec![(-100.0, 100.0)],
        };
        ModelSpec::new(
            ModelFamily::new(CovarianceStructure::Spherical, Proportions::Equal, bounds),
            k,
            1,
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_contrast_is_its_differential_entropy() {
        let f0 = DensitySpec::standard_normal();
        let params = MixtureParams::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let v = expected_contrast(&f0, &params, &QuadratureRule::default_trapezoid()).unwrap();
        assert_abs_diff_eq!(v, HALF_LOG_2PI_E, epsilon = 1e-9);
    }

    #[test]
    fn mean_shift_adds_half_mu_squared() {
        let f0 = DensitySpec::standard_normal();
        let rule = QuadratureRule::default_trapezoid();
        for mu in [0.5, 1.0, 1.7] {
            let params = MixtureParams::univariate(&[(1.0, mu, 1.0)]).unwrap();
            let v = expected_contrast(&f0, &params, &rule).unwrap();
            assert_abs_diff_eq!(v, HALF_LOG_2PI_E + 0.5 * mu * mu, epsilon = 1e-9);
        }
    }

    #[test]
    fn reported_pair_minimizer_beats_neighbors() {
        let f0 = DensitySpec::standard_normal();
        let rule = QuadratureRule::default_trapezoid();
        let value = |mu: f64, var: f64| {
            let params = MixtureParams::univariate(&[(0.5, -mu, var), (0.5, mu, var)]).unwrap();
            expected_contrast(&f0, &params, &rule).unwrap()
        };
        let at_min = value(0.83, 0.31);
        assert!(at_min < value(0.0, 1.0));
        assert!(at_min < value(2.0, 0.31));
    }

    #[test]
    fn quadrature_rules_agree() {
        // the dense trapezoid is the workhorse; the transformed Gauss-Hermite
        // rule is the independent route, compared at the named evaluation
        // points of the symmetric-pair study
        let f0 = DensitySpec::standard_normal();
        let trap = QuadratureRule::trapezoid_for(&f0).unwrap();
        let gh = QuadratureRule::gauss_hermite(&f0, 1024).unwrap();
        for (mu, var) in [(0.0, 1.0), (0.83, 0.31), (2.0, 0.31), (0.3, 1.8)] {
            let params = MixtureParams::univariate(&[(0.5, -mu, var), (0.5, mu, var)]).unwrap();
            let a = raw_quadrature(&f0, &params, &trap).unwrap();
            let b = raw_quadrature(&f0, &params, &gh).unwrap();
            assert!((a - b).abs() < 1e-5, "mu={mu} var={var}: {a} vs {b}");
        }
    }

    #[test]
    fn contrast_is_sign_symmetric_in_mu() {
        let f0 = DensitySpec::standard_normal();
        let rule = QuadratureRule::default_trapezoid();
        let plus = MixtureParams::univariate(&[(0.5, -0.7, 0.5), (0.5, 0.7, 0.5)]).unwrap();
        let minus = MixtureParams::univariate(&[(0.5, 0.7, 0.5), (0.5, -0.7, 0.5)]).unwrap();
        let a = expected_contrast(&f0, &plus, &rule).unwrap();
        let b = expected_contrast(&f0, &minus, &rule).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn coarse_rule_is_reported() {
        let f0 = DensitySpec::standard_normal();
        let params = MixtureParams::univariate(&[(1.0, 0.0, 0.005)]).unwrap();
        // 21 nodes over [-10, 10] cannot resolve a sd-0.07 spike
        let rule = QuadratureRule::trapezoid(-10.0, 10.0, 21).unwrap();
        assert!(matches!(
            expected_contrast(&f0, &params, &rule),
            Err(Error::RuleTooCoarse(_))
        ));
    }

    #[test]
    fn k1_minimizer_recovers_the_sampling_density() {
        let f0 = DensitySpec::standard_normal();
        let (params, value) =
            minimize_expected_contrast(&f0, &spec_k(1), &PopulationGrid::default_standard(), true)
                .unwrap();
        assert!((params.components()[0].mean[0]).abs() < 0.01);
        assert!((params.components()[0].covariance[(0, 0)] - 1.0).abs() < 0.01);
        assert_abs_diff_eq!(value, HALF_LOG_2PI_E, epsilon = 1e-6);
    }

    #[test]
    fn dropping_the_entropy_term_recovers_the_kl_minimizer() {
        // minimizing the cross-entropy part alone over the symmetric pair
        // collapses the pair onto the sampling density: mu ~ 0, var ~ 1
        let f0 = DensitySpec::standard_normal();
        let rule = QuadratureRule::trapezoid_for(&f0).unwrap();
        let eff: Vec<f64> = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&x, &w)| w * f0.density_1d(x))
            .collect();
        let cross_entropy = |mu: f64, var: f64| -> f64 {
            let params = MixtureParams::univariate(&[(0.5, -mu, var), (0.5, mu, var)]).unwrap();
            let contrast = Contrast1d::new(&params).unwrap();
            let mut buf = Vec::new();
            rule.nodes()
                .iter()
                .zip(&eff)
                .map(|(&x, &w)| {
                    // integrand minus its entropy part
                    let full = contrast.integrand(x, &mut buf);
                    let lse = log_sum_exp(&buf);
                    let mut ent = 0.0;
                    for &lj in buf.iter() {
                        let tau = (lj - lse).exp();
                        if tau > 1e-300 {
                            ent -= tau * (lj - lse);
                        }
                    }
                    w * (full - ent)
                })
                .sum()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let mut mu = 0.0;
        while mu <= 2.0 {
            let mut var = 0.05;
            while var <= 2.0 {
                let v = cross_entropy(mu, var);
                if v < best.0 {
                    best = (v, mu, var);
                }
                var += 0.05;
            }
            mu += 0.05;
        }
        assert!(best.1.abs() <= 0.05, "mu = {}", best.1);
        assert!((best.2 - 1.0).abs() <= 0.05, "var = {}", best.2);
    }

    #[test]
    fn population_k0_prefers_one_class_under_standard_normal() {
        let f0 = DensitySpec::standard_normal();
        let grid = PopulationGrid::default_standard();
        let k0 = population_k0(&f0, &[spec_k(1), spec_k(2)], &grid).unwrap();
        assert_eq!(k0, 1);
    }

    #[test]
    fn population_k0_prefers_two_classes_when_separated() {
        let truth = MixtureParams::univariate(&[(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)]).unwrap();
        let f0 = DensitySpec::mixture(truth);
        let grid = PopulationGrid::for_density(&f0).unwrap();
        let k0 = population_k0(&f0, &[spec_k(1), spec_k(2)], &grid).unwrap();
        assert_eq!(k0, 2);
    }

    #[test]
    fn singleton_spec_set_returns_its_k() {
        let f0 = DensitySpec::standard_normal();
        let grid = PopulationGrid::default_standard();
        assert_eq!(population_k0(&f0, &[spec_k(2)], &grid).unwrap(), 2);
    }

    #[test]
    fn monte_carlo_matches_quadrature() {
        let f0 = DensitySpec::standard_normal();
        let rule = QuadratureRule::default_trapezoid();
        let mut rng = rng_from_seed(31);
        let sample = sample_mixture(f0.params(), 1_000_000, &mut rng).unwrap();
        for trial in 0..10 {
            let mu = 0.2 + 0.15 * trial as f64;
            let var = 0.3 + 0.1 * trial as f64;
            let params = if trial % 2 == 0 {
                MixtureParams::univariate(&[(0.5, -mu, var), (0.5, mu, var)]).unwrap()
            } else {
                MixtureParams::univariate(&[(1.0, mu, var)]).unwrap()
            };
            let exact = expected_contrast(&f0, &params, &rule).unwrap();
            let (empirical, std_err) = empirical_contrast(&params, &sample).unwrap();
            assert!(
                (empirical - exact).abs() < 3.0 * std_err,
                "trial {trial}: {empirical} vs {exact} (3se = {})",
                3.0 * std_err
            );
        }
    }

    #[test]
    fn grid_rejects_empty_input() {
        assert!(PopulationGrid::new(vec![], vec![1.0]).is_err());
        let mut rng = rng_from_seed(1);
        let _ = rng.random::<f64>();
    }
}

//! Mixture parameters, model families, compactness bounds and free-parameter
//! counting.
//!
//! A model family fixes the covariance structure, the proportion constraint
//! and a compact box for every parameter. Estimation never leaves that box:
//! [`project_to_bounds`] is the single projection used by the M-step, the
//! gradient polish and the public API, and it is exactly idempotent.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Covariance constraint of a component family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceStructure {
    /// One variance per component, `v_k * I`.
    Spherical,
    /// Free diagonal covariances.
    Diagonal,
    /// Diagonal covariances sharing one volume: `det` equal across components.
    DiagonalEqualVolume,
    /// Unconstrained symmetric positive-definite covariances.
    Full,
}

impl CovarianceStructure {
    pub fn name(&self) -> &'static str {
        match self {
            CovarianceStructure::Spherical => "spherical",
            CovarianceStructure::Diagonal => "diag",
            CovarianceStructure::DiagonalEqualVolume => "diag-eqvol",
            CovarianceStructure::Full => "full",
        }
    }
}

impl std::str::FromStr for CovarianceStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(CovarianceStructure::Spherical),
            "diag" | "diagonal" => Ok(CovarianceStructure::Diagonal),
            "diag-eqvol" => Ok(CovarianceStructure::DiagonalEqualVolume),
            "full" => Ok(CovarianceStructure::Full),
            other => Err(Error::InvalidFamily(format!(
                "unknown covariance structure '{other}'"
            ))),
        }
    }
}

/// Mixing-proportion constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proportions {
    Free,
    Equal,
}

impl Proportions {
    pub fn name(&self) -> &'static str {
        match self {
            Proportions::Free => "free",
            Proportions::Equal => "equal",
        }
    }
}

impl std::str::FromStr for Proportions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Proportions::Free),
            "equal" => Ok(Proportions::Equal),
            other => Err(Error::InvalidFamily(format!(
                "unknown proportion constraint '{other}'"
            ))),
        }
    }
}

/// Compactness bounds of the parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// Lower bound on every mixing weight, in `(0, 1/K]`.
    pub prop_floor: f64,
    /// Lower bound on every covariance eigenvalue.
    pub var_floor: f64,
    /// Upper bound on every covariance eigenvalue.
    pub var_ceil: f64,
    /// Per-coordinate interval for the means.
    pub mean_box: Vec<(f64, f64)>,
}

impl Bounds {
    /// Data-scaled default bounds: an absolute weight floor of `1e-3`,
    /// eigenvalue bounds at `1e-4` and `1e4` times the average per-coordinate
    /// variance, and a mean box equal to the data range padded by three
    /// standard deviations.
    pub fn from_data(data: &DataMatrix) -> Result<Self> {
        let d = data.n_cols();
        let mut variances = Vec::with_capacity(d);
        for j in 0..d {
            variances.push(data.column_variance(j));
        }
        let mean_var = variances.iter().sum::<f64>() / d as f64;
        if mean_var <= 0.0 {
            return Err(Error::DegenerateData);
        }
        let mean_box = (0..d)
            .map(|j| {
                let (lo, hi) = data.column_min_max(j);
                let mut pad = 3.0 * variances[j].sqrt();
                if pad <= 0.0 {
                    pad = 1e-6 * (1.0 + lo.abs().max(hi.abs()));
                }
                (lo - pad, hi + pad)
            })
            .collect();
        Ok(Self {
            prop_floor: 1e-3,
            var_floor: 1e-4 * mean_var,
            var_ceil: 1e4 * mean_var,
            mean_box,
        })
    }

    /// Bounds derived from mixture moments instead of a sample; used when the
    /// sampling distribution is known and bounds must not vary per replicate.
    pub fn from_mixture(params: &MixtureParams) -> Result<Self> {
        let d = params.dim();
        let mut total_var = vec![0.0; d];
        let mut mixture_mean = vec![0.0; d];
        for (w, comp) in params.weights().iter().zip(params.components()) {
            for j in 0..d {
                mixture_mean[j] += w * comp.mean[j];
                total_var[j] += w * (comp.covariance[(j, j)] + comp.mean[j].powi(2));
            }
        }
        for j in 0..d {
            total_var[j] -= mixture_mean[j].powi(2);
        }
        let mean_var = total_var.iter().sum::<f64>() / d as f64;
        if mean_var <= 0.0 {
            return Err(Error::DegenerateData);
        }
        let mean_box = (0..d)
            .map(|j| {
                let sd = total_var[j].sqrt();
                let lo = params
                    .components()
                    .iter()
                    .map(|c| c.mean[j] - 3.0 * c.covariance[(j, j)].sqrt())
                    .fold(f64::INFINITY, f64::min);
                let hi = params
                    .components()
                    .iter()
                    .map(|c| c.mean[j] + 3.0 * c.covariance[(j, j)].sqrt())
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo - 3.0 * sd, hi + 3.0 * sd)
            })
            .collect();
        Ok(Self {
            prop_floor: 1e-3,
            var_floor: 1e-4 * mean_var,
            var_ceil: 1e4 * mean_var,
            mean_box,
        })
    }
}

/// Covariance structure, proportion constraint and compactness bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily {
    pub structure: CovarianceStructure,
    pub proportions: Proportions,
    pub bounds: Bounds,
}

impl ModelFamily {
    pub fn new(structure: CovarianceStructure, proportions: Proportions, bounds: Bounds) -> Self {
        Self {
            structure,
            proportions,
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.mean_box.len()
    }

    pub fn validate(&self, k: usize, d: usize) -> Result<()> {
        if k == 0 || d == 0 {
            return Err(Error::InvalidFamily("K and d must be positive".into()));
        }
        let b = &self.bounds;
        if !(b.prop_floor > 0.0 && b.prop_floor * k as f64 <= 1.0) {
            return Err(Error::InvalidFamily(format!(
                "prop_floor {} must lie in (0, 1/K] for K = {}",
                b.prop_floor, k
            )));
        }
        if !(b.var_floor > 0.0 && b.var_floor <= b.var_ceil) {
            return Err(Error::InvalidFamily(format!(
                "need 0 < var_floor <= var_ceil, got [{}, {}]",
                b.var_floor, b.var_ceil
            )));
        }
        if b.mean_box.len() != d {
            return Err(Error::InvalidFamily(format!(
                "mean box has {} coordinates, expected {}",
                b.mean_box.len(),
                d
            )));
        }
        for &(lo, hi) in &b.mean_box {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidFamily(format!(
                    "mean interval [{lo}, {hi}] must be bounded and nonempty"
                )));
            }
        }
        Ok(())
    }
}

/// A family instantiated at a component count, with its free-parameter count.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n_components: usize,
    pub dim_data: usize,
    dimension: usize,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, n_components: usize, dim_data: usize) -> Result<Self> {
        family.validate(n_components, dim_data)?;
        let dimension = count_free_parameters(&family, n_components, dim_data);
        Ok(Self {
            family,
            n_components,
            dim_data,
            dimension,
        })
    }

    /// Number of free parameters of the instantiated family.
    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// Number of free parameters of a K-component family in dimension d.
pub fn count_free_parameters(family: &ModelFamily, k: usize, d: usize) -> usize {
    let proportions = match family.proportions {
        Proportions::Free => k - 1,
        Proportions::Equal => 0,
    };
    let means = k * d;
    let covariances = match family.structure {
        CovarianceStructure::Spherical => k,
        CovarianceStructure::Diagonal => k * d,
        CovarianceStructure::DiagonalEqualVolume => k * (d - 1) + 1,
        CovarianceStructure::Full => k * d * (d + 1) / 2,
    };
    proportions + means + covariances
}

/// One Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl Component {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self { mean, covariance }
    }
}

/// Weights plus per-component mean and covariance of a Gaussian mixture.
///
/// Construction validates the invariants: weights sum to one within `1e-12`
/// and are nonnegative, covariances are symmetric within `1e-12` and positive
/// definite, and all components share one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidParams(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidParams(format!("negative weight {w}")));
        }
        let d = components[0].mean.len();
        for (k, comp) in components.iter().enumerate() {
            if comp.mean.len() != d || comp.covariance.nrows() != d || comp.covariance.ncols() != d
            {
                return Err(Error::InvalidParams(format!(
                    "component {k} does not have dimension {d}"
                )));
            }
            if comp.mean.iter().any(|m| !m.is_finite())
                || comp.covariance.iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidParams(format!(
                    "component {k} has non-finite entries"
                )));
            }
            let scale = comp
                .covariance
                .iter()
                .fold(1.0_f64, |acc, v| acc.max(v.abs()));
            for i in 0..d {
                for j in (i + 1)..d {
                    if (comp.covariance[(i, j)] - comp.covariance[(j, i)]).abs() > 1e-12 * scale {
                        return Err(Error::InvalidParams(format!(
                            "component {k} covariance is not symmetric"
                        )));
                    }
                }
            }
            if nalgebra::Cholesky::new(comp.covariance.clone()).is_none() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// 1-d convenience constructor from `(weight, mean, variance)` triples.
    pub fn univariate(triples: &[(f64, f64, f64)]) -> Result<Self> {
        let weights = triples.iter().map(|t| t.0).collect();
        let components = triples
            .iter()
            .map(|&(_, m, v)| {
                Component::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, v))
            })
            .collect();
        Self::new(weights, components)
    }

    /// Skips validation; for intermediate values (raw M-step moments) that go
    /// straight into `project_to_bounds`.
    pub(crate) fn new_unchecked(weights: Vec<f64>, components: Vec<Component>) -> Self {
        Self {
            weights,
            components,
        }
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Relabels components; `perm[new_index] = old_index`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_components() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let weights = perm.iter().map(|&o| self.weights[o]).collect();
        let components = perm.iter().map(|&o| self.components[o].clone()).collect();
        Self::new(weights, components)
    }
}

/// Hard assignments, one component index per observation.
///
/// Stands for the n-by-K indicator matrix with exactly one 1 per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    labels: Vec<usize>,
    n_components: usize,
}

impl LabelMatrix {
    pub fn from_labels(labels: Vec<usize>, n_components: usize) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::InvalidParams("zero components".into()));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= n_components) {
            return Err(Error::InvalidParams(format!(
                "label {l} out of range for {n_components} components"
            )));
        }
        Ok(Self {
            labels,
            n_components,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indicator-matrix view: 1 iff observation `i` carries label `k`.
    pub fn indicator(&self, i: usize, k: usize) -> bool {
        self.labels[i] == k
    }
}

/// Projects arbitrary mixture parameters onto the family's feasible set.
///
/// Weights are clipped to the floor and the free mass renormalized until the
/// result is feasible, means are clamped to the mean box, covariance
/// eigenvalues are clamped to `[var_floor, var_ceil]` and the structure
/// constraint is enforced. The map is exactly idempotent: feasible input is
/// returned unchanged.
pub fn project_to_bounds(params: &MixtureParams, family: &ModelFamily) -> Result<MixtureParams> {
    let k = params.n_components();
    let d = params.dim();
    family.validate(k, d)?;

    let weights = match family.proportions {
        Proportions::Free => project_weights(params.weights(), family.bounds.prop_floor),
        Proportions::Equal => {
            let uniform = 1.0 / k as f64;
            if params.weights().iter().all(|&w| w == uniform) {
                params.weights().to_vec()
            } else {
                vec![uniform; k]
            }
        }
    };

    let mut components = Vec::with_capacity(k);
    for comp in params.components() {
        let mut mean = comp.mean.clone();
        for j in 0..d {
            let (lo, hi) = family.bounds.mean_box[j];
            mean[j] = mean[j].clamp(lo, hi);
        }
        components.push(Component::new(mean, comp.covariance.clone()));
    }
    project_covariances(&mut components, family)?;

    MixtureParams::new(weights, components)
}

/// Clip-to-floor with renormalization of the free mass, iterated to a fixed
/// point so the output is feasible and re-projection is the identity.
fn project_weights(weights: &[f64], floor: f64) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().all(|&w| w >= floor) && (sum - 1.0).abs() <= 1e-12 {
        return weights.to_vec();
    }
    let k = weights.len();
    let mut v: Vec<f64> = weights.iter().map(|&w| w.max(floor)).collect();
    let mut pinned = vec![false; k];
    for _ in 0..k {
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let target = 1.0 - floor * n_pinned as f64;
        let free_sum: f64 = v
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(x, _)| x)
            .sum();
        if n_pinned == k || free_sum <= 0.0 {
            let n_free = k - n_pinned;
            if n_free > 0 {
                for (x, &p) in v.iter_mut().zip(&pinned) {
                    if !p {
                        *x = target / n_free as f64;
                    }
                }
            }
            break;
        }
        let scale = target / free_sum;
        for (x, &p) in v.iter_mut().zip(&pinned) {
            if !p {
                *x *= scale;
            }
        }
        let mut newly_pinned = false;
        for (x, p) in v.iter_mut().zip(pinned.iter_mut()) {
            if !*p && *x < floor {
                *x = floor;
                *p = true;
                newly_pinned = true;
            }
        }
        if !newly_pinned {
            break;
        }
    }
    v
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

fn project_covariances(components: &mut [Component], family: &ModelFamily) -> Result<()> {
    let floor = family.bounds.var_floor;
    let ceil = family.bounds.var_ceil;
    let d = components[0].mean.len();
    match family.structure {
        CovarianceStructure::Spherical => {
            for comp in components.iter_mut() {
                let m = &comp.covariance;
                let in_range = (0..d)
                    .all(|j| m[(j, j)] == m[(0, 0)] && m[(j, j)] >= floor && m[(j, j)] <= ceil);
                if is_diagonal(m) && in_range {
                    continue;
                }
                let v = ((0..d).map(|j| m[(j, j)]).sum::<f64>() / d as f64).clamp(floor, ceil);
                comp.covariance = DMatrix::from_diagonal_element(d, d, v);
            }
        }
        CovarianceStructure::Diagonal => {
            for comp in components.iter_mut() {
                let m = &comp.covariance;
                let in_range = (0..d).all(|j| m[(j, j)] >= floor && m[(j, j)] <= ceil);
                if is_diagonal(m) && in_range {
                    continue;
                }
                let diag = DVector::from_iterator(d, (0..d).map(|j| m[(j, j)].clamp(floor, ceil)));
                comp.covariance = DMatrix::from_diagonal(&diag);
            }
        }
        CovarianceStructure::DiagonalEqualVolume => {
            project_equal_volume(components, floor, ceil);
        }
        CovarianceStructure::Full => {
            for comp in components.iter_mut() {
                let m = &comp.covariance;
                let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
                let symmetric =
                    (0..d).all(|i| (i..d).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale));
                let sym = if symmetric {
                    m.clone()
                } else {
                    (m + m.transpose()) * 0.5
                };
                let eig = nalgebra::SymmetricEigen::new(sym);
                let slack = 1e-11 * ceil.max(1.0);
                let in_range = eig
                    .eigenvalues
                    .iter()
                    .all(|&l| l >= floor - slack && l <= ceil + slack);
                if symmetric && in_range {
                    continue;
                }
                let clamped =
                    DVector::from_iterator(d, eig.eigenvalues.iter().map(|l| l.clamp(floor, ceil)));
                let rebuilt = &eig.eigenvectors
                    * DMatrix::from_diagonal(&clamped)
                    * eig.eigenvectors.transpose();
                comp.covariance = (&rebuilt + rebuilt.transpose()) * 0.5;
            }
        }
    }
    Ok(())
}

/// Diagonal covariances with one shared volume. In log-eigenvalue space the
/// constraint set is the intersection of a box with the equal-mean-log
/// subspace; each component is shifted by a scalar found by bisection so its
/// mean log-eigenvalue hits the common target.
fn project_equal_volume(components: &mut [Component], floor: f64, ceil: f64) {
    let d = components[0].mean.len();
    let log_floor = floor.ln();
    let log_ceil = ceil.ln();

    let clamped_logs: Vec<Vec<f64>> = components
        .iter()
        .map(|c| {
            (0..d)
                .map(|j| c.covariance[(j, j)].clamp(floor, ceil).ln())
                .collect()
        })
        .collect();
    let volumes: Vec<f64> = clamped_logs
        .iter()
        .map(|logs| logs.iter().sum::<f64>() / d as f64)
        .collect();

    let feasible = components.iter().enumerate().all(|(k, c)| {
        is_diagonal(&c.covariance)
            && (0..d).all(|j| {
                let v = c.covariance[(j, j)];
                v >= floor && v <= ceil
            })
            && (volumes[k] - volumes[0]).abs() <= 1e-11
    });
    if feasible {
        return;
    }

    // Common log-volume target: average of per-component volumes, hence
    // always inside [log_floor, log_ceil] and reachable by every component.
    let target = volumes.iter().sum::<f64>() / components.len() as f64;

    for (comp, logs) in components.iter_mut().zip(&clamped_logs) {
        let mean_log = |shift: f64| -> f64 {
            logs.iter()
                .map(|&l| (l + shift).clamp(log_floor, log_ceil))
                .sum::<f64>()
                / d as f64
        };
        let mut lo = log_floor - logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut hi = log_ceil - logs.iter().cloned().fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_log(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shift = 0.5 * (lo + hi);
        let diag = DVector::from_iterator(
            d,
            logs.iter().map(|&l| {
                (l + shift)
                    .clamp(log_floor, log_ceil)
                    .exp()
                    .clamp(floor, ceil)
            }),
        );
        comp.covariance = DMatrix::from_diagonal(&diag);
    }
}

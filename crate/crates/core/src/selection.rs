//! Model-selection criteria over a range of component counts.
//!
//! All criteria are stored in "larger is better" orientation with the shared
//! penalty `(log n)/2 * D_K`: AIC and BIC penalize the log-likelihood at the
//! MLE, the two ICL variants additionally subtract an assignment-uncertainty
//! term at the MLE, and Lcc-ICL penalizes the conditional classification
//! log-likelihood at the MLccE.

use crate::error::{Error, Result};
use crate::estimation::{Estimator, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    Aic,
    Bic,
    /// ICL with hard MAP labels at the MLE.
    IclMap,
    /// ICL with soft responsibilities at the MLE, i.e. BIC minus entropy.
    IclTau,
    /// Penalized conditional classification log-likelihood at the MLccE.
    LccIcl,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Aic,
        Criterion::Bic,
        Criterion::IclMap,
        Criterion::IclTau,
        Criterion::LccIcl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::IclMap => "icl-map",
            Criterion::IclTau => "icl-tau",
            Criterion::LccIcl => "lcc-icl",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "icl-map" => Ok(Criterion::IclMap),
            "icl-tau" => Ok(Criterion::IclTau),
            "lcc-icl" => Ok(Criterion::LccIcl),
            other => Err(Error::UnknownCriterion(other.to_string())),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-K criterion values for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRow {
    pub n_components: usize,
    pub dimension: usize,
    pub log_lik_mle: f64,
    pub entropy_mle: f64,
    pub lcc_mlcce: f64,
    pub aic: f64,
    pub bic: f64,
    pub icl_map: f64,
    pub icl_tau: f64,
    pub lcc_icl: f64,
}

impl CriterionRow {
    pub fn value(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
            Criterion::IclMap => self.icl_map,
            Criterion::IclTau => self.icl_tau,
            Criterion::LccIcl => self.lcc_icl,
        }
    }
}

/// Criterion values for every fitted K, with the per-criterion selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionTable {
    rows: Vec<CriterionRow>,
}

impl CriterionTable {
    pub fn rows(&self) -> &[CriterionRow] {
        &self.rows
    }

    pub fn row_for(&self, n_components: usize) -> Option<&CriterionRow> {
        self.rows.iter().find(|r| r.n_components == n_components)
    }
}

/// Builds the criterion table from per-K fits of both estimators over the
/// same K range.
pub fn compute_criteria(
    fits_mle: &[FitResult],
    fits_mlcce: &[FitResult],
    n: usize,
) -> Result<CriterionTable> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "selection needs at least two observations (log n penalty degenerates)".into(),
        ));
    }
    if fits_mle.is_empty() || fits_mle.len() != fits_mlcce.len() {
        return Err(Error::KRangeMismatch);
    }
    let half_log_n = 0.5 * (n as f64).ln();

    let mut rows = Vec::with_capacity(fits_mle.len());
    for (mle, mlcce) in fits_mle.iter().zip(fits_mlcce) {
        if mle.spec.n_components != mlcce.spec.n_components {
            return Err(Error::KRangeMismatch);
        }
        if mle.estimator != Estimator::Mle {
            return Err(Error::EstimatorMismatch {
                expected: "mle",
                got: mle.estimator.name(),
            });
        }
        if mlcce.estimator != Estimator::Mlcce {
            return Err(Error::EstimatorMismatch {
                expected: "mlcce",
                got: mlcce.estimator.name(),
            });
        }
        let dimension = mle.spec.dimension();
        let penalty = half_log_n * dimension as f64;
        let log_lik = mle.contrast.log_lik;
        let entropy = mle.contrast.entropy;
        rows.push(CriterionRow {
            n_components: mle.spec.n_components,
            dimension,
            log_lik_mle: log_lik,
            entropy_mle: entropy,
            lcc_mlcce: mlcce.contrast.lcc,
            aic: log_lik - dimension as f64,
            bic: log_lik - penalty,
            icl_map: log_lik + mle.map_assignment_log_prob - penalty,
            icl_tau: log_lik - entropy - penalty,
            lcc_icl: mlcce.contrast.lcc - penalty,
        });
    }
    Ok(CriterionTable { rows })
}

/// Smallest K attaining the maximum criterion value.
pub fn select_k(table: &CriterionTable, criterion: Criterion) -> usize {
    let mut best = &table.rows[0];
    for row in &table.rows[1..] {
        if row.value(criterion) > best.value(criterion) {
            best = row;
        }
    }
    best.n_components
}

/// Penalty values evaluated on a finite `(n, K)` grid.
#[derive(Debug, Clone)]
pub struct PenaltyGrid {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    /// `values[i][j]` is the penalty at `n_values[i]`, `k_values[j]`.
    pub values: Vec<Vec<f64>>,
}

impl PenaltyGrid {
    pub fn evaluate(
        n_values: &[usize],
        k_values: &[usize],
        pen: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let values = n_values
            .iter()
            .map(|&n| k_values.iter().map(|&k| pen(n, k)).collect())
            .collect();
        Self {
            n_values: n_values.to_vec(),
            k_values: k_values.to_vec(),
            values,
        }
    }
}

/// Finite-grid surrogate report for the penalty-family conditions. The
/// asymptotic statements are not decidable from a finite grid; this is a
/// heuristic diagnostic, nothing more.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyReport {
    /// `pen > 0` at every grid point.
    pub positive: bool,
    /// `pen/n` strictly decreasing along the n grid for every K.
    pub vanishing_rate: bool,
    /// `pen(K) - pen(K')` strictly increasing along the n grid for K > K'.
    pub gaps_diverging: bool,
}

impl PenaltyReport {
    pub fn all_pass(&self) -> bool {
        self.positive && self.vanishing_rate && self.gaps_diverging
    }
}

/// Checks the penalty-shape conditions on a finite grid.
pub fn check_penalty_family(grid: &PenaltyGrid) -> Result<PenaltyReport> {
    if grid.n_values.len() < 2 || grid.k_values.len() < 2 {
        return Err(Error::InvalidConfig(
            "penalty grid needs at least two n values and two K values".into(),
        ));
    }
    if grid.values.len() != grid.n_values.len()
        || grid
            .values
            .iter()
            .any(|row| row.len() != grid.k_values.len())
    {
        return Err(Error::DimensionMismatch("penalty grid shape".into()));
    }

    let positive = grid.values.iter().flatten().all(|&v| v > 0.0);

    let mut vanishing_rate = true;
    for j in 0..grid.k_values.len() {
        for i in 1..grid.n_values.len() {
            let prev = grid.values[i - 1][j] / grid.n_values[i - 1] as f64;
            let next = grid.values[i][j] / grid.n_values[i] as f64;
            if !(next < prev) {
                vanishing_rate = false;
            }
        }
    }

    let mut gaps_diverging = true;
    for hi in 0..grid.k_values.len() {
        for lo in 0..hi {
            if grid.k_values[hi] <= grid.k_values[lo] {
                continue;
            }
            for i in 1..grid.n_values.len() {
                let prev = grid.values[i - 1][hi] - grid.values[i - 1][lo];
                let next = grid.values[i][hi] - grid.values[i][lo];
                if !(next > prev) {
                    gaps_diverging = false;
                }
            }
        }
    }

    Ok(PenaltyReport {
        positive,
        vanishing_rate,
        gaps_diverging,
    })
}

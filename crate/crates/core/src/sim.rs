//! Monte Carlo selection-frequency experiments: sample from a known mixture,
//! run the full fit-and-select pipeline per replicate, tabulate how often
//! each criterion picks each component count.
//!
//! Replicate `r` at sample size `n` draws every random quantity from the seed
//! `derive_seed(derive_seed(scenario_seed, n), r)`, so outcomes are
//! independent of scheduling and of the replicate count.

use std::fmt::Write as _;

use rand::Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::estimation::{fit_both, FitConfig, FitResult};
use crate::gaussian::CholeskyFactor;
use crate::model::{MixtureParams, ModelFamily, ModelSpec};
use crate::parallel;
use crate::population::DensitySpec;
use crate::rng::{derive_seed, rng_from_seed};
use crate::selection::{compute_criteria, select_k, Criterion};

/// Draws `n` observations: a component index from the weights, then a
/// Gaussian draw. With a single component no index is drawn, so the stream
/// coincides with repeated Gaussian sampling.
pub fn sample_mixture<R: Rng + ?Sized>(
    params: &MixtureParams,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "cannot sample zero observations".into(),
        ));
    }
    let d = params.dim();
    let k = params.n_components();
    let factors: Vec<CholeskyFactor> = params
        .components()
        .iter()
        .map(|c| CholeskyFactor::from_covariance(&c.covariance))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<Vec<f64>> = params
        .components()
        .iter()
        .map(|c| c.mean.iter().cloned().collect())
        .collect();

    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let component = if k == 1 {
            0
        } else {
            let mut u = rng.random::<f64>();
            let mut chosen = k - 1;
            for (idx, w) in params.weights().iter().enumerate() {
                if u < *w {
                    chosen = idx;
                    break;
                }
                u -= w;
            }
            chosen
        };
        let draw = crate::gaussian::sample_gaussian(&means[component], &factors[component], rng);
        values.extend_from_slice(&draw);
    }
    DataMatrix::from_flat(values, n, d)
}

/// One Monte Carlo experiment: truth, fitted family, K range, sample sizes,
/// replicate count, criteria of interest and fit settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub truth: DensitySpec,
    pub family: ModelFamily,
    pub k_min: usize,
    pub k_max: usize,
    pub n_values: Vec<usize>,
    pub n_replicates: usize,
    pub criteria: Vec<Criterion>,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::InvalidConfig(format!(
                "component range {}..={} is empty",
                self.k_min, self.k_max
            )));
        }
        if self.n_values.is_empty() || self.n_replicates == 0 || self.criteria.is_empty() {
            return Err(Error::InvalidConfig(
                "scenario needs sample sizes, replicates and criteria".into(),
            ));
        }
        self.fit.validate()
    }

    fn specs(&self) -> Result<Vec<ModelSpec>> {
        (self.k_min..=self.k_max)
            .map(|k| ModelSpec::new(self.family.clone(), k, self.truth.dim()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum ReplicateOutcome {
    /// Selected K per scenario criterion, plus the (ICL-tau, Lcc-ICL) pair
    /// for the agreement rate.
    Selected(Vec<usize>, (usize, usize)),
    Failed,
}

pub(crate) fn run_replicate(scenario: &Scenario, n: usize, replicate: usize) -> ReplicateOutcome {
    let seed = derive_seed(derive_seed(scenario.seed, n as u64), replicate as u64);
    let mut rng = rng_from_seed(seed);
    let data = match sample_mixture(scenario.truth.params(), n, &mut rng) {
        Ok(d) => d,
        Err(_) => return ReplicateOutcome::Failed,
    };

    let specs = match scenario.specs() {
        Ok(s) => s,
        Err(_) => return ReplicateOutcome::Failed,
    };
    let mut mles: Vec<FitResult> = Vec::with_capacity(specs.len());
    let mut mlcces: Vec<FitResult> = Vec::with_capacity(specs.len());
    for spec in &specs {
        let config = FitConfig {
            seed: derive_seed(seed, spec.n_components as u64),
            ..scenario.fit.clone()
        };
        match fit_both(&data, spec, &config) {
            Ok((mle, mlcce)) => {
                // EM non-convergence invalidates the replicate; the polish is
                // an approximate maximizer by design, so its convergence flag
                // does not (boundary optima are approached, never reached)
                if !mle.converged {
                    return ReplicateOutcome::Failed;
                }
                mles.push(mle);
                mlcces.push(mlcce);
            }
            Err(_) => return ReplicateOutcome::Failed,
        }
    }

    let table = match compute_criteria(&mles, &mlcces, n) {
        Ok(t) => t,
        Err(_) => return ReplicateOutcome::Failed,
    };
    let selections = scenario
        .criteria
        .iter()
        .map(|&c| select_k(&table, c))
        .collect();
    let icl_pair = (
        select_k(&table, Criterion::IclTau),
        select_k(&table, Criterion::LccIcl),
    );
    ReplicateOutcome::Selected(selections, icl_pair)
}

/// Selection frequencies per `(criterion, n, K)` with replicate bookkeeping.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    criteria: Vec<Criterion>,
    n_values: Vec<usize>,
    k_values: Vec<usize>,
    /// `counts[criterion][n][k]` selections among included replicates.
    counts: Vec<Vec<Vec<usize>>>,
    /// Included replicates per n.
    included: Vec<usize>,
    /// Failed (excluded) replicates per n.
    failed: Vec<usize>,
    /// Replicates where ICL-tau and Lcc-ICL picked the same K, per n.
    icl_agreement: Vec<usize>,
}

impl FrequencyTable {
    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn n_values(&self) -> &[usize] {
        &self.n_values
    }

    pub fn k_values(&self) -> &[usize] {
        &self.k_values
    }

    fn n_index(&self, n: usize) -> Option<usize> {
        self.n_values.iter().position(|&v| v == n)
    }

    /// Fraction of included replicates where `criterion` selected `k` at
    /// sample size `n`.
    pub fn frequency(&self, criterion: Criterion, n: usize, k: usize) -> f64 {
        let ci = self
            .criteria
            .iter()
            .position(|&c| c == criterion)
            .unwrap_or(usize::MAX);
        let ni = self.n_index(n).unwrap_or(usize::MAX);
        let ki = self.k_values.iter().position(|&v| v == k);
        match (ci, ni, ki) {
            (ci, ni, Some(ki)) if ci != usize::MAX && ni != usize::MAX => {
                self.counts[ci][ni][ki] as f64 / self.included[ni].max(1) as f64
            }
            _ => 0.0,
        }
    }

    /// Included replicates at sample size `n`.
    pub fn replicates(&self, n: usize) -> usize {
        self.n_index(n).map(|i| self.included[i]).unwrap_or(0)
    }

    pub fn failed(&self, n: usize) -> usize {
        self.n_index(n).map(|i| self.failed[i]).unwrap_or(0)
    }

    /// Agreement rate between ICL-tau and Lcc-ICL selections.
    pub fn icl_agreement_rate(&self, n: usize) -> f64 {
        match self.n_index(n) {
            Some(i) => self.icl_agreement[i] as f64 / self.included[i].max(1) as f64,
            None => 0.0,
        }
    }

    /// CSV emission with columns criterion, n, K, frequency, replicates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("criterion,n,K,frequency,replicates\n");
        for (ci, criterion) in self.criteria.iter().enumerate() {
            for (ni, &n) in self.n_values.iter().enumerate() {
                for (ki, &k) in self.k_values.iter().enumerate() {
                    let freq = self.counts[ci][ni][ki] as f64 / self.included[ni].max(1) as f64;
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        criterion, n, k, freq, self.included[ni]
                    );
                }
            }
        }
        out
    }

    /// Markdown summary with one frequency table per sample size.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Selection frequencies\n");
        for (ni, &n) in self.n_values.iter().enumerate() {
            let _ = writeln!(
                out,
                "\n## n = {} ({} replicates included, {} failed)\n",
                n, self.included[ni], self.failed[ni]
            );
            let mut header = String::from("| criterion |");
            let mut rule = String::from("| --- |");
            for &k in &self.k_values {
                let _ = write!(header, " K={k} |");
                rule.push_str(" --- |");
            }
            out.push_str(&header);
            out.push('\n');
            out.push_str(&rule);
            out.push('\n');
            for (ci, criterion) in self.criteria.iter().enumerate() {
                let _ = write!(out, "| {criterion} |");
                for ki in 0..self.k_values.len() {
                    let freq = self.counts[ci][ni][ki] as f64 / self.included[ni].max(1) as f64;
                    let _ = write!(out, " {freq:.3} |");
                }
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "\nICL-tau / Lcc-ICL agreement rate: {:.3}",
                self.icl_agreement_rate(n)
            );
        }
        out
    }
}

/// Runs every replicate of the scenario and aggregates selection counts.
/// Replicates failing to fit or to converge are excluded and counted; more
/// than 5% failures across the run is an error.
pub fn run_scenario(scenario: &Scenario) -> Result<FrequencyTable> {
    scenario.validate()?;
    scenario.specs()?;

    let criteria = scenario.criteria.clone();
    let k_values: Vec<usize> = (scenario.k_min..=scenario.k_max).collect();
    let mut counts =
        vec![vec![vec![0usize; k_values.len()]; scenario.n_values.len()]; criteria.len()];
    let mut included = vec![0usize; scenario.n_values.len()];
    let mut failed = vec![0usize; scenario.n_values.len()];
    let mut icl_agreement = vec![0usize; scenario.n_values.len()];

    for (ni, &n) in scenario.n_values.iter().enumerate() {
        let outcomes =
            parallel::map_collect(scenario.n_replicates, |rep| run_replicate(scenario, n, rep));
        for outcome in outcomes {
            match outcome {
                ReplicateOutcome::Selected(selections, (icl_k, lcc_k)) => {
                    included[ni] += 1;
                    for (ci, &k) in selections.iter().enumerate() {
                        let ki = k - scenario.k_min;
                        counts[ci][ni][ki] += 1;
                    }
                    if icl_k == lcc_k {
                        icl_agreement[ni] += 1;
                    }
                }
                ReplicateOutcome::Failed => failed[ni] += 1,
            }
        }
    }

    let total_failed: usize = failed.iter().sum();
    let total: usize = scenario.n_values.len() * scenario.n_replicates;
    if 20 * total_failed > total {
        return Err(Error::TooManyFailures {
            failed: total_failed,
            total,
        });
    }

    Ok(FrequencyTable {
        criteria,
        n_values: scenario.n_values.clone(),
        k_values,
        counts,
        included,
        failed,
        icl_agreement,
    })
}

//! `fit`: fit both estimators for every K in a range, tabulate the selection
//! criteria, persist one artifact per (K, estimator) and report the selected
//! K per criterion.

use std::fmt::Write as _;
use std::path::PathBuf;

use lccmix_core::data::DataMatrix;
use lccmix_core::estimation::{fit_both, FitConfig, FitResult};
use lccmix_core::model::{Bounds, CovarianceStructure, ModelFamily, ModelSpec, Proportions};
use lccmix_core::selection::{compute_criteria, select_k, Criterion, CriterionTable};

use crate::artifact::{write_artifact, ModelArtifact};
use crate::errors::{CliError, CliResult};

pub struct FitOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub structure: CovarianceStructure,
    pub proportions: Proportions,
    pub criteria: Vec<Criterion>,
    pub config: FitConfig,
    pub var_floor: Option<f64>,
    pub prop_floor: Option<f64>,
    pub output_dir: PathBuf,
}

pub struct FitReport {
    pub selections: Vec<(Criterion, usize)>,
    pub written: Vec<PathBuf>,
}

/// Tracks written files so a failed run leaves no partial outputs behind.
struct OutputGuard {
    written: Vec<PathBuf>,
    keep: bool,
}

impl OutputGuard {
    fn new() -> Self {
        Self {
            written: Vec::new(),
            keep: false,
        }
    }

    fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.keep {
            for path in &self.written {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

pub fn run(data: &DataMatrix, options: &FitOptions) -> CliResult<FitReport> {
    if options.k_min == 0 || options.k_min > options.k_max {
        return Err(CliError::config(format!(
            "empty component range {}..={}",
            options.k_min, options.k_max
        )));
    }
    let mut bounds = Bounds::from_data(data)?;
    if let Some(v) = options.var_floor {
        if !(v > 0.0 && v <= bounds.var_ceil) {
            return Err(CliError::config(format!("invalid var-floor {v}")));
        }
        bounds.var_floor = v;
    }
    if let Some(p) = options.prop_floor {
        if !(p > 0.0 && p * options.k_max as f64 <= 1.0) {
            return Err(CliError::config(format!("invalid prop-floor {p}")));
        }
        bounds.prop_floor = p;
    }
    let family = ModelFamily::new(options.structure, options.proportions, bounds);

    std::fs::create_dir_all(&options.output_dir)?;
    let mut guard = OutputGuard::new();

    let mut fits: Vec<(FitResult, FitResult)> = Vec::new();
    for k in options.k_min..=options.k_max {
        let spec = ModelSpec::new(family.clone(), k, data.n_cols())?;
        fits.push(fit_both(data, &spec, &options.config)?);
    }
    let mles: Vec<FitResult> = fits.iter().map(|(m, _)| m.clone()).collect();
    let mlcces: Vec<FitResult> = fits.iter().map(|(_, m)| m.clone()).collect();
    let table = compute_criteria(&mles, &mlcces, data.n_rows())?;

    for (row, (mle, mlcce)) in table.rows().iter().zip(&fits) {
        for fit in [mle, mlcce] {
            let artifact = ModelArtifact::from_fit(fit, row, options.config.seed);
            let path = options.output_dir.join(format!(
                "model_k{}_{}.json",
                row.n_components,
                fit.estimator.name()
            ));
            write_artifact(&path, &artifact)?;
            guard.record(path);
        }
    }

    let csv_path = options.output_dir.join("criteria.csv");
    std::fs::write(&csv_path, table_to_csv(&table))?;
    guard.record(csv_path);
    let md_path = options.output_dir.join("criteria.md");
    std::fs::write(&md_path, table_to_markdown(&table))?;
    guard.record(md_path);

    let selections = options
        .criteria
        .iter()
        .map(|&c| (c, select_k(&table, c)))
        .collect();

    guard.keep = true;
    Ok(FitReport {
        selections,
        written: std::mem::take(&mut guard.written),
    })
}

pub fn table_to_csv(table: &CriterionTable) -> String {
    let mut out = String::from(
        "k,dimension,log_lik_mle,entropy_mle,lcc_mlcce,aic,bic,icl_map,icl_tau,lcc_icl\n",
    );
    for row in table.rows() {
        let _ = writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.n_components,
            row.dimension,
            row.log_lik_mle,
            row.entropy_mle,
            row.lcc_mlcce,
            row.aic,
            row.bic,
            row.icl_map,
            row.icl_tau,
            row.lcc_icl
        );
    }
    out
}

pub fn table_to_markdown(table: &CriterionTable) -> String {
    let mut out = String::from("# Selection criteria\n\n");
    out.push_str("| K | D_K | log L (MLE) | Ent (MLE) | Lcc (MLccE) | aic | bic | icl-map | icl-tau | lcc-icl |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- |\n");
    for row in table.rows() {
        let _ = writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
            row.n_components,
            row.dimension,
            row.log_lik_mle,
            row.entropy_mle,
            row.lcc_mlcce,
            row.aic,
            row.bic,
            row.icl_map,
            row.icl_tau,
            row.lcc_icl
        );
    }
    out.push_str("\nSelected K per criterion:\n\n");
    for criterion in Criterion::ALL {
        let _ = writeln!(out, "- {}: K = {}", criterion, select_k(table, criterion));
    }
    out
}

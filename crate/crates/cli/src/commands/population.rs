//! `population`: the quadrature engine's minimizer per K and the
//! population-best number of classes over a K range.

use std::fmt::Write as _;

use lccmix_core::model::{
    Bounds, CovarianceStructure, MixtureParams, ModelFamily, ModelSpec, Proportions,
};
use lccmix_core::population::{minimize_expected_contrast, DensitySpec, PopulationGrid};

use crate::errors::{CliError, CliResult};

pub struct PopulationOptions {
    /// `weight,mean,variance` triples separated by semicolons; standard
    /// normal when empty.
    pub truth: Option<String>,
    pub k_min: usize,
    pub k_max: usize,
}

pub fn parse_truth(text: &str) -> CliResult<MixtureParams> {
    let mut triples = Vec::new();
    for part in text.split(';') {
        let fields: Vec<&str> = part.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::config(format!(
                "truth component '{part}' must be weight,mean,variance"
            )));
        }
        let parse = |s: &str| -> CliResult<f64> {
            s.parse()
                .map_err(|_| CliError::config(format!("non-numeric truth field '{s}'")))
        };
        triples.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    MixtureParams::univariate(&triples).map_err(|e| CliError::config(e.to_string()))
}

pub fn run(options: &PopulationOptions) -> CliResult<String> {
    if options.k_min == 0 || options.k_min > options.k_max {
        return Err(CliError::config(format!(
            "empty component range {}..={}",
            options.k_min, options.k_max
        )));
    }
    let f0 = match &options.truth {
        Some(text) => DensitySpec::mixture(parse_truth(text)?),
        None => DensitySpec::standard_normal(),
    };
    let grid = PopulationGrid::for_density(&f0)?;

    // wide bounds; the grid engine itself constrains the search
    let bounds = Bounds {
        prop_floor: 1e-3,
        var_floor: 1e-8,
        var_ceil: 1e8,
        mean_box: vec![(-1e4, 1e4)],
    };
    let family = ModelFamily::new(CovarianceStructure::Spherical, Proportions::Equal, bounds);

    let mut out = String::new();
    let mut best: Option<(f64, usize)> = None;
    for k in options.k_min..=options.k_max {
        let spec = ModelSpec::new(family.clone(), k, 1)?;
        let (params, value) = minimize_expected_contrast(&f0, &spec, &grid, true)?;
        let rep = params.components().last().expect("k >= 1");
        let _ = writeln!(
            out,
            "K={k}: minimizer mu={:.6} var={:.6}, expected contrast {:.8}",
            rep.mean[0],
            rep.covariance[(0, 0)],
            value
        );
        // ties keep the smaller K
        if best.is_none_or(|(v, _)| value < v) {
            best = Some((value, k));
        }
    }
    let (_, k0) = best.expect("nonempty range");
    let _ = writeln!(out, "K0 = {k0}");
    Ok(out)
}

//! `classify`: MAP labels with per-row responsibilities and the per-row
//! assignment-uncertainty contribution.

use std::fmt::Write as _;

use lccmix_core::contrast::responsibilities;
use lccmix_core::data::DataMatrix;

use crate::artifact::ModelArtifact;
use crate::errors::{CliError, CliResult};

/// Columns: row index, MAP label, tau_1..tau_K, per-row entropy h_K(tau).
pub fn run(artifact: &ModelArtifact, data: &DataMatrix) -> CliResult<String> {
    if artifact.spec.dim_data != data.n_cols() {
        return Err(CliError::input(format!(
            "artifact dimension {} does not match dataset with {} columns",
            artifact.spec.dim_data,
            data.n_cols()
        )));
    }
    let resp = responsibilities(&artifact.params, data)?;
    let labels = resp.map_labels();

    let k = resp.n_components();
    let mut out = String::from("row,label");
    for j in 1..=k {
        let _ = write!(out, ",tau_{j}");
    }
    out.push_str(",entropy\n");
    for i in 0..resp.n_rows() {
        let _ = write!(out, "{},{}", i, labels[i]);
        for j in 0..k {
            let _ = write!(out, ",{:.16e}", resp.value(i, j));
        }
        let _ = writeln!(out, ",{:.16e}", resp.row_entropy(i));
    }
    Ok(out)
}

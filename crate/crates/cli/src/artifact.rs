//! Model persistence: a self-describing JSON document with every real
//! serialized at 17 significant decimal digits, which round-trips binary64
//! exactly. The writer is hand-rolled to control the float formatting; the
//! reader goes through serde_json.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use lccmix_core::contrast::ContrastValues;
use lccmix_core::estimation::{Estimator, FitResult};
use lccmix_core::model::{
    Bounds, Component, CovarianceStructure, MixtureParams, ModelFamily, ModelSpec, Proportions,
};
use lccmix_core::selection::CriterionRow;

use crate::errors::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// The five criterion values of one fitted K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaValues {
    pub aic: f64,
    pub bic: f64,
    pub icl_map: f64,
    pub icl_tau: f64,
    pub lcc_icl: f64,
}

impl From<&CriterionRow> for CriteriaValues {
    fn from(row: &CriterionRow) -> Self {
        Self {
            aic: row.aic,
            bic: row.bic,
            icl_map: row.icl_map,
            icl_tau: row.icl_tau,
            lcc_icl: row.lcc_icl,
        }
    }
}

/// A fitted model with its selection-criterion row and provenance.
#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub spec: ModelSpec,
    pub params: MixtureParams,
    pub contrast: ContrastValues,
    pub criteria: CriteriaValues,
    pub estimator: Estimator,
    pub converged: bool,
    pub n_iters: usize,
    pub restart_index: usize,
    pub seed: u64,
    pub tool_version: String,
    pub created_unix: u64,
}

impl ModelArtifact {
    pub fn from_fit(fit: &FitResult, criteria: &CriterionRow, seed: u64) -> Self {
        Self {
            spec: fit.spec.clone(),
            params: fit.params.clone(),
            contrast: fit.contrast,
            criteria: criteria.into(),
            estimator: fit.estimator,
            converged: fit.converged,
            n_iters: fit.n_iters,
            restart_index: fit.restart_index,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// 17 significant digits; parses back to the same bits.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_array(values: impl IntoIterator<Item = f64>) -> String {
    let inner: Vec<String> = values.into_iter().map(fmt_f64).collect();
    format!("[{}]", inner.join(", "))
}

pub fn to_json(artifact: &ModelArtifact) -> String {
    let mut s = String::new();
    let spec = &artifact.spec;
    let b = &spec.family.bounds;
    let _ = writeln!(s, "{{");
    let _ = writeln!(s, "  \"schema_version\": {},", SCHEMA_VERSION);
    let _ = writeln!(s, "  \"tool_version\": \"{}\",", artifact.tool_version);
    let _ = writeln!(s, "  \"created_unix\": {},", artifact.created_unix);
    let _ = writeln!(s, "  \"seed\": {},", artifact.seed);
    let _ = writeln!(s, "  \"estimator\": \"{}\",", artifact.estimator.name());
    let _ = writeln!(s, "  \"model\": {{");
    let _ = writeln!(
        s,
        "    \"structure\": \"{}\",",
        spec.family.structure.name()
    );
    let _ = writeln!(
        s,
        "    \"proportions\": \"{}\",",
        spec.family.proportions.name()
    );
    let _ = writeln!(s, "    \"n_components\": {},", spec.n_components);
    let _ = writeln!(s, "    \"dim\": {},", spec.dim_data);
    let _ = writeln!(s, "    \"dimension\": {},", spec.dimension());
    let _ = writeln!(s, "    \"prop_floor\": {},", fmt_f64(b.prop_floor));
    let _ = writeln!(s, "    \"var_floor\": {},", fmt_f64(b.var_floor));
    let _ = writeln!(s, "    \"var_ceil\": {},", fmt_f64(b.var_ceil));
    let boxes: Vec<String> = b
        .mean_box
        .iter()
        .map(|&(lo, hi)| fmt_array([lo, hi]))
        .collect();
    let _ = writeln!(s, "    \"mean_box\": [{}]", boxes.join(", "));
    let _ = writeln!(s, "  }},");
    let _ = writeln!(
        s,
        "  \"weights\": {},",
        fmt_array(artifact.params.weights().iter().cloned())
    );
    let _ = writeln!(s, "  \"components\": [");
    for (idx, comp) in artifact.params.components().iter().enumerate() {
        let rows: Vec<String> = (0..comp.covariance.nrows())
            .map(|i| fmt_array((0..comp.covariance.ncols()).map(|j| comp.covariance[(i, j)])))
            .collect();
        let _ = writeln!(s, "    {{");
        let _ = writeln!(
            s,
            "      \"mean\": {},",
            fmt_array(comp.mean.iter().cloned())
        );
        let _ = writeln!(s, "      \"covariance\": [{}]", rows.join(", "));
        let _ = writeln!(
            s,
            "    }}{}",
            if idx + 1 < artifact.params.n_components() {
                ","
            } else {
                ""
            }
        );
    }
    let _ = writeln!(s, "  ],");
    let _ = writeln!(s, "  \"contrast\": {{");
    let _ = writeln!(
        s,
        "    \"log_lik\": {},",
        fmt_f64(artifact.contrast.log_lik)
    );
    let _ = writeln!(
        s,
        "    \"entropy\": {},",
        fmt_f64(artifact.contrast.entropy)
    );
    let _ = writeln!(s, "    \"lcc\": {}", fmt_f64(artifact.contrast.lcc));
    let _ = writeln!(s, "  }},");
    let c = &artifact.criteria;
    let _ = writeln!(s, "  \"criteria\": {{");
    let _ = writeln!(s, "    \"aic\": {},", fmt_f64(c.aic));
    let _ = writeln!(s, "    \"bic\": {},", fmt_f64(c.bic));
    let _ = writeln!(s, "    \"icl_map\": {},", fmt_f64(c.icl_map));
    let _ = writeln!(s, "    \"icl_tau\": {},", fmt_f64(c.icl_tau));
    let _ = writeln!(s, "    \"lcc_icl\": {}", fmt_f64(c.lcc_icl));
    let _ = writeln!(s, "  }},");
    let _ = writeln!(s, "  \"fit\": {{");
    let _ = writeln!(s, "    \"converged\": {},", artifact.converged);
    let _ = writeln!(s, "    \"n_iters\": {},", artifact.n_iters);
    let _ = writeln!(s, "    \"restart_index\": {}", artifact.restart_index);
    let _ = writeln!(s, "  }}");
    let _ = writeln!(s, "}}");
    s
}

#[derive(Deserialize)]
struct ModelDoc {
    structure: String,
    proportions: String,
    n_components: usize,
    dim: usize,
    dimension: usize,
    prop_floor: f64,
    var_floor: f64,
    var_ceil: f64,
    mean_box: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ComponentDoc {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ContrastDoc {
    log_lik: f64,
    entropy: f64,
    lcc: f64,
}

#[derive(Deserialize)]
struct CriteriaDoc {
    aic: f64,
    bic: f64,
    icl_map: f64,
    icl_tau: f64,
    lcc_icl: f64,
}

#[derive(Deserialize)]
struct FitDoc {
    converged: bool,
    n_iters: usize,
    restart_index: usize,
}

#[derive(Deserialize)]
struct ArtifactDoc {
    schema_version: u32,
    tool_version: String,
    created_unix: u64,
    seed: u64,
    estimator: String,
    model: ModelDoc,
    weights: Vec<f64>,
    components: Vec<ComponentDoc>,
    contrast: ContrastDoc,
    criteria: CriteriaDoc,
    fit: FitDoc,
}

pub fn from_json(text: &str) -> CliResult<ModelArtifact> {
    let doc: ArtifactDoc = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("artifact parse error: {e}")))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "unsupported artifact schema version {}",
            doc.schema_version
        )));
    }

    let structure: CovarianceStructure = doc.model.structure.parse()?;
    let proportions: Proportions = doc.model.proportions.parse()?;
    let mean_box: Vec<(f64, f64)> = doc
        .model
        .mean_box
        .iter()
        .map(|pair| {
            if pair.len() == 2 {
                Ok((pair[0], pair[1]))
            } else {
                Err(CliError::input("mean_box entries must be [lo, hi] pairs"))
            }
        })
        .collect::<CliResult<_>>()?;
    let family = ModelFamily::new(
        structure,
        proportions,
        Bounds {
            prop_floor: doc.model.prop_floor,
            var_floor: doc.model.var_floor,
            var_ceil: doc.model.var_ceil,
            mean_box,
        },
    );
    let spec = ModelSpec::new(family, doc.model.n_components, doc.model.dim)?;
    if spec.dimension() != doc.model.dimension {
        return Err(CliError::input(format!(
            "artifact dimension {} does not match the family's free-parameter count {}",
            doc.model.dimension,
            spec.dimension()
        )));
    }

    let components = doc
        .components
        .iter()
        .map(|c| {
            let d = c.mean.len();
            if c.covariance.len() != d || c.covariance.iter().any(|row| row.len() != d) {
                return Err(CliError::input("component covariance shape mismatch"));
            }
            let mut cov = DMatrix::zeros(d, d);
            for (i, row) in c.covariance.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    cov[(i, j)] = *v;
                }
            }
            Ok(Component::new(DVector::from_vec(c.mean.clone()), cov))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let params = MixtureParams::new(doc.weights, components)?;

    let estimator = match doc.estimator.as_str() {
        "mle" => Estimator::Mle,
        "mlcce" => Estimator::Mlcce,
        other => {
            return Err(CliError::input(format!("unknown estimator tag '{other}'")));
        }
    };

    Ok(ModelArtifact {
        criteria: CriteriaValues {
            aic: doc.criteria.aic,
            bic: doc.criteria.bic,
            icl_map: doc.criteria.icl_map,
            icl_tau: doc.criteria.icl_tau,
            lcc_icl: doc.criteria.lcc_icl,
        },
        spec,
        params,
        contrast: ContrastValues {
            log_lik: doc.contrast.log_lik,
            entropy: doc.contrast.entropy,
            lcc: doc.contrast.lcc,
        },
        estimator,
        converged: doc.fit.converged,
        n_iters: doc.fit.n_iters,
        restart_index: doc.fit.restart_index,
        seed: doc.seed,
        tool_version: doc.tool_version,
        created_unix: doc.created_unix,
    })
}

pub fn write_artifact(path: &Path, artifact: &ModelArtifact) -> CliResult<()> {
    std::fs::write(path, to_json(artifact))?;
    Ok(())
}

pub fn read_artifact(path: &Path) -> CliResult<ModelArtifact> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_artifact() -> ModelArtifact {
        let bounds = Bounds {
            prop_floor: 1e-3,
            var_floor: 1.2345678901234567e-4,
            var_ceil: 9.87654321e3,
            mean_box: vec![(-7.0, 7.0)],
        };
        let family = ModelFamily::new(CovarianceStructure::Diagonal, Proportions::Free, bounds);
        let spec = ModelSpec::new(family, 2, 1).unwrap();
        let params = MixtureParams::univariate(&[
            (0.30000000000000004, -1.0 / 3.0, 0.1 + 0.2),
            (0.7, std::f64::consts::PI, 2.0 / 3.0),
        ])
        .unwrap();
        ModelArtifact {
            spec,
            params,
            contrast: ContrastValues {
                log_lik: -123.45678901234567,
                entropy: 0.1 / 3.0,
                lcc: -123.49012234567901,
            },
            criteria: CriteriaValues {
                aic: -128.45678901234567,
                bic: -135.1,
                icl_map: -135.2,
                icl_tau: -135.3,
                lcc_icl: -135.4,
            },
            estimator: Estimator::Mlcce,
            converged: true,
            n_iters: 42,
            restart_index: 3,
            seed: 99,
            tool_version: "0.1.0".into(),
            created_unix: 1_700_000_000,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let artifact = sample_artifact();
        let text = to_json(&artifact);
        let back = from_json(&text).unwrap();
        for (a, b) in artifact.params.weights().iter().zip(back.params.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in artifact
            .params
            .components()
            .iter()
            .zip(back.params.components())
        {
            assert_eq!(a.mean[0].to_bits(), b.mean[0].to_bits());
            assert_eq!(
                a.covariance[(0, 0)].to_bits(),
                b.covariance[(0, 0)].to_bits()
            );
        }
        assert_eq!(
            artifact.contrast.log_lik.to_bits(),
            back.contrast.log_lik.to_bits()
        );
        assert_eq!(artifact.criteria.bic.to_bits(), back.criteria.bic.to_bits());
        assert_eq!(
            artifact.spec.family.bounds.var_floor.to_bits(),
            back.spec.family.bounds.var_floor.to_bits()
        );
        assert_eq!(back.estimator, Estimator::Mlcce);
        assert_eq!(back.n_iters, 42);
    }

    #[test]
    fn serialization_is_stable() {
        let artifact = sample_artifact();
        assert_eq!(to_json(&artifact), to_json(&artifact));
    }

    #[test]
    fn rejects_unknown_schema_version() {
        let artifact = sample_artifact();
        let text = to_json(&artifact).replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(from_json(&text).is_err());
    }
}

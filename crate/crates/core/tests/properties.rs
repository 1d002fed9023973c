//! Property tests over randomized inputs: projection feasibility and
//! idempotence, contrast invariances, entropy bounds and parameter counting.

use lccmix_core::contrast::{conditional_classification_loglik, h_k, map_classify};
use lccmix_core::data::DataMatrix;
use lccmix_core::model::{
    count_free_parameters, project_to_bounds, Bounds, Component, CovarianceStructure,
    MixtureParams, ModelFamily, Proportions,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn structures() -> impl Strategy<Value = CovarianceStructure> {
    prop_oneof![
        Just(CovarianceStructure::Spherical),
        Just(CovarianceStructure::Diagonal),
        Just(CovarianceStructure::DiagonalEqualVolume),
        Just(CovarianceStructure::Full),
    ]
}

fn proportions() -> impl Strategy<Value = Proportions> {
    prop_oneof![Just(Proportions::Free), Just(Proportions::Equal)]
}

/// Arbitrary 1-d mixtures with valid but possibly extreme values.
fn mixtures_1d(max_k: usize) -> impl Strategy<Value = MixtureParams> {
    (1..=max_k)
        .prop_flat_map(|k| {
            (
                proptest::collection::vec(0.05f64..1.0, k),
                proptest::collection::vec(-8.0f64..8.0, k),
                proptest::collection::vec(0.05f64..4.0, k),
            )
        })
        .prop_map(|(raw_w, means, vars)| {
            let total: f64 = raw_w.iter().sum();
            // normalize then force exact unit sum, which float division alone
            // does not guarantee
            let mut weights: Vec<f64> = raw_w.iter().map(|w| w / total).collect();
            let correction: f64 = 1.0 - weights.iter().sum::<f64>();
            weights[0] += correction;
            let triples: Vec<(f64, f64, f64)> = weights
                .iter()
                .zip(means.iter().zip(&vars))
                .map(|(&w, (&m, &v))| (w, m, v))
                .collect();
            MixtureParams::univariate(&triples).unwrap()
        })
}

fn family_for(structure: CovarianceStructure, props: Proportions, d: usize) -> ModelFamily {
    ModelFamily::new(
        structure,
        props,
        Bounds {
            prop_floor: 0.03,
            var_floor: 0.02,
            var_ceil: 50.0,
            mean_box: vec![(-5.0, 5.0); d],
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_output_is_feasible_and_idempotent(
        structure in structures(),
        props in proportions(),
        weights in proptest::collection::vec(0.0f64..1.0, 2),
        mean_entries in proptest::collection::vec(-12.0f64..12.0, 4),
        cov_entries in proptest::collection::vec(-3.0f64..3.0, 6),
    ) {
        // assemble a raw 2-component 2-d mixture, deliberately off-structure
        let total: f64 = weights.iter().sum::<f64>() + 1e-9;
        let mut w: Vec<f64> = weights.iter().map(|x| x / total).collect();
        let correction: f64 = 1.0 - w.iter().sum::<f64>();
        w[0] += correction;
        let comps: Vec<Component> = (0..2)
            .map(|c| {
                let m = DVector::from_vec(vec![mean_entries[2 * c], mean_entries[2 * c + 1]]);
                // positive definite but off-structure and possibly out of the
                // eigenvalue box: L L^T + epsilon I
                let lower = DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        cov_entries[3 * c].abs() + 0.05,
                        0.0,
                        cov_entries[3 * c + 1] * 3.0,
                        cov_entries[3 * c + 2].abs() + 0.05,
                    ],
                );
                let raw = &lower * lower.transpose() + DMatrix::identity(2, 2) * 1e-6;
                Component::new(m, raw)
            })
            .collect();
        let raw = MixtureParams::new(w, comps).unwrap();

        let family = family_for(structure, props, 2);
        let once = project_to_bounds(&raw, &family).unwrap();
        let twice = project_to_bounds(&once, &family).unwrap();
        prop_assert_eq!(&once, &twice);

        let b = &family.bounds;
        for weight in once.weights() {
            prop_assert!(*weight >= b.prop_floor - 1e-12);
        }
        for comp in once.components() {
            for j in 0..2 {
                let (lo, hi) = b.mean_box[j];
                prop_assert!(comp.mean[j] >= lo && comp.mean[j] <= hi);
            }
            let eig = nalgebra::SymmetricEigen::new(comp.covariance.clone());
            for lambda in eig.eigenvalues.iter() {
                prop_assert!(*lambda >= b.var_floor - 1e-9 && *lambda <= b.var_ceil + 1e-9);
            }
        }
    }

    #[test]
    fn contrasts_are_label_switch_invariant(
        params in mixtures_1d(4),
        xs in proptest::collection::vec(-6.0f64..6.0, 1..30),
        rotation in 0usize..4,
    ) {
        let k = params.n_components();
        let perm: Vec<usize> = (0..k).map(|i| (i + rotation) % k).collect();
        let permuted = params.permuted(&perm).unwrap();
        let data = DataMatrix::from_column(xs).unwrap();

        let a = conditional_classification_loglik(&params, &data).unwrap();
        let b = conditional_classification_loglik(&permuted, &data).unwrap();
        prop_assert!((a.log_lik - b.log_lik).abs() < 1e-10);
        prop_assert!((a.entropy - b.entropy).abs() < 1e-10);
        prop_assert!((a.lcc - b.lcc).abs() < 1e-10);

        let la = map_classify(&params, &data).unwrap();
        let lb = map_classify(&permuted, &data).unwrap();
        for (x, y) in la.iter().zip(&lb) {
            prop_assert_eq!(perm[*y], *x);
        }
    }

    #[test]
    fn entropy_stays_within_bounds(
        params in mixtures_1d(5),
        xs in proptest::collection::vec(-10.0f64..10.0, 1..40),
    ) {
        let n = xs.len();
        let k = params.n_components();
        let data = DataMatrix::from_column(xs).unwrap();
        let values = conditional_classification_loglik(&params, &data).unwrap();
        prop_assert!(values.entropy >= 0.0);
        prop_assert!(values.entropy <= n as f64 * (k as f64).ln() + 1e-9);
        prop_assert!(values.lcc <= values.log_lik);
    }

    #[test]
    fn entropy_kernel_sum_bounded_by_log_k(
        raw in proptest::collection::vec(1e-6f64..1.0, 1..6),
    ) {
        let total: f64 = raw.iter().sum();
        let simplex: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let value = h_k(&simplex).unwrap();
        prop_assert!(value >= 0.0);
        prop_assert!(value <= (simplex.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn parameter_counts_are_monotone_in_k(
        structure in structures(),
        props in proportions(),
        d in 1usize..4,
    ) {
        let family = family_for(structure, props, d);
        let mut prev = 0;
        for k in 1..8 {
            let dim = count_free_parameters(&family, k, d);
            prop_assert!(dim >= prev);
            prev = dim;
        }
    }
}

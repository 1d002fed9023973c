//! Parallel-vs-sequential timings for the data-parallel hot paths:
//! responsibility sweeps, multi-restart fitting and Monte Carlo replicates.
//!
//! With the default `parallel` feature the same workload runs inside rayon
//! pools of different sizes (a 1-thread pool is the sequential baseline);
//! built with `--no-default-features` the native sequential path is measured.
//! Results are bit-identical either way; only the wall time moves.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lccmix_core::contrast::responsibilities;
use lccmix_core::data::DataMatrix;
use lccmix_core::estimation::{fit_both, FitConfig};
use lccmix_core::model::{
    Bounds, CovarianceStructure, MixtureParams, ModelFamily, ModelSpec, Proportions,
};
use lccmix_core::population::DensitySpec;
use lccmix_core::rng::rng_from_seed;
use lccmix_core::selection::Criterion as SelectionCriterion;
use lccmix_core::sim::{run_scenario, sample_mixture, Scenario};

fn two_component_data(n: usize) -> DataMatrix {
    let truth = MixtureParams::univariate(&[(0.5, -3.0, 1.0), (0.5, 3.0, 1.5)]).unwrap();
    sample_mixture(&truth, n, &mut rng_from_seed(11)).unwrap()
}

fn run_cases(c: &mut Criterion, name: &str, mut task: impl FnMut() + Send) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    for threads in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        group.bench_with_input(BenchmarkId::new("threads", threads), &threads, |b, _| {
            b.iter(|| pool.install(&mut task));
        });
    }

    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(&mut task);
    });

    group.finish();
}

fn bench_responsibilities(c: &mut Criterion) {
    let params = MixtureParams::univariate(&[
        (0.2, -4.0, 1.0),
        (0.3, -1.0, 0.6),
        (0.3, 1.5, 1.2),
        (0.2, 4.5, 0.8),
    ])
    .unwrap();
    let data = sample_mixture(&params, 50_000, &mut rng_from_seed(3)).unwrap();
    run_cases(c, "responsibilities_n50k_k4", move || {
        let resp = responsibilities(&params, &data).unwrap();
        std::hint::black_box(resp.log_likelihood());
    });
}

fn bench_fit_both(c: &mut Criterion) {
    let data = two_component_data(3000);
    let family = ModelFamily::new(
        CovarianceStructure::Diagonal,
        Proportions::Free,
        Bounds::from_data(&data).unwrap(),
    );
    let spec = ModelSpec::new(family, 2, 1).unwrap();
    let config = FitConfig {
        n_restarts: 4,
        max_em_iters: 300,
        em_tol: 1e-6,
        max_grad_iters: 30,
        seed: 5,
        ..FitConfig::default()
    };
    run_cases(c, "fit_both_n3000_k2_r4", move || {
        let (mle, mlcce) = fit_both(&data, &spec, &config).unwrap();
        std::hint::black_box((mle.contrast.log_lik, mlcce.contrast.lcc));
    });
}

fn bench_scenario(c: &mut Criterion) {
    let truth = DensitySpec::mixture(
        MixtureParams::univariate(&[(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)]).unwrap(),
    );
    let family = ModelFamily::new(
        CovarianceStructure::Diagonal,
        Proportions::Free,
        Bounds::from_mixture(truth.params()).unwrap(),
    );
    let scenario = Scenario {
        truth,
        family,
        k_min: 1,
        k_max: 2,
        n_values: vec![300],
        n_replicates: 8,
        criteria: vec![SelectionCriterion::Bic, SelectionCriterion::LccIcl],
        seed: 17,
        fit: FitConfig {
            n_restarts: 2,
            max_em_iters: 300,
            em_tol: 1e-6,
            max_grad_iters: 30,
            ..FitConfig::default()
        },
    };
    run_cases(c, "scenario_8_replicates_n300", move || {
        let table = run_scenario(&scenario).unwrap();
        std::hint::black_box(table.frequency(SelectionCriterion::Bic, 300, 2));
    });
}

criterion_group!(
    benches,
    bench_responsibilities,
    bench_fit_both,
    bench_scenario
);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use quadscore::dgp::{population_score_curve, sample, Design, DgpSpec, SeparationDesign};
use quadscore::resampling::bootstrap_replicates;
use quadscore::{CovarianceModel, MethodSpec, SeededRng};

fn single_thread() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
}

fn bootstrap(c: &mut Criterion) {
    let rng = SeededRng::new(1, 0);
    let data = sample(&DgpSpec::new(Design::Pentagon5, 300), &rng).unwrap();
    let specs: Vec<MethodSpec> = (1..=4)
        .map(|k| MethodSpec::gaussian(k, CovarianceModel::VVV, 100.0))
        .collect();
    let mut group = c.benchmark_group("bootstrap_b20");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| bootstrap_replicates(&data, &specs, 20, &rng))
    });
    let pool = single_thread();
    group.bench_function("sequential", |b| {
        b.iter(|| pool.install(|| bootstrap_replicates(&data, &specs, 20, &rng)))
    });
    group.finish();
}

fn population_curve(c: &mut Criterion) {
    let rng = SeededRng::new(2, 0);
    let grid: Vec<f64> = (0..8).map(|i| 2.5 + 0.2 * i as f64).collect();
    let mut group = c.benchmark_group("population_curve");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| population_score_curve(SeparationDesign::Gaussian, &grid, 10_000, 4, &rng))
    });
    let pool = single_thread();
    group.bench_function("sequential", |b| {
        b.iter(|| {
            pool.install(|| {
                population_score_curve(SeparationDesign::Gaussian, &grid, 10_000, 4, &rng)
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bootstrap, population_curve);
criterion_main!(benches);

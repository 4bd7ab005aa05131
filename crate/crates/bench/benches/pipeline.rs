use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fcmdnn_core::dataset::gen_synthetic;
use fcmdnn_core::pipeline::{run_experiment, ExperimentConfig, ModelKind};
use fcmdnn_core::preprocess::PreprocessConfig;

fn bench_nn_run(c: &mut Criterion) {
    let dataset = gen_synthetic(50, 50, 8, 2).unwrap();
    let mut config = ExperimentConfig::new(ModelKind::Nn, 5, 2);
    config.preprocess = PreprocessConfig {
        target_side: 8,
        ..PreprocessConfig::default()
    };
    config.network.epochs = Some(5);
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("nn_100x64_k5", |b| {
        b.iter(|| run_experiment(black_box(&dataset), &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_nn_run);
criterion_main!(benches);

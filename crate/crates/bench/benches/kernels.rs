use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fcmdnn_core::dataset::gen_synthetic;
use fcmdnn_core::fcm::{run_fcm, FcmConfig};
use fcmdnn_core::metrics::roc_auc;
use fcmdnn_core::network::{backward, forward, NetworkParams, NetworkSpec, TrainingExample};
use fcmdnn_core::preprocess::resize_image;

fn bench_fcm(c: &mut Criterion) {
    let dataset = gen_synthetic(100, 100, 8, 1).unwrap();
    let data: Vec<Vec<f64>> = dataset
        .samples
        .iter()
        .map(|s| s.pixels.iter().map(|p| p / 255.0).collect())
        .collect();
    c.bench_function("fcm_200x64_c5", |b| {
        b.iter(|| run_fcm(black_box(&data), &FcmConfig::new(5, 3)).unwrap())
    });
}

fn bench_resize(c: &mut Criterion) {
    let pixels: Vec<f64> = (0..64 * 64).map(|i| (i % 251) as f64).collect();
    c.bench_function("resize_64_to_16", |b| {
        b.iter(|| resize_image(black_box(&pixels), 64, 64, 16, 16).unwrap())
    });
}

fn bench_roc(c: &mut Criterion) {
    let scores: Vec<f64> = (0..1000).map(|i| ((i * 37) % 1000) as f64 / 999.0).collect();
    let actual: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
    c.bench_function("roc_auc_1000", |b| {
        b.iter(|| roc_auc(black_box(&scores), black_box(&actual)).unwrap())
    });
}

fn bench_forward_backward(c: &mut Criterion) {
    let spec = NetworkSpec::dnn_default(256, 1, 5);
    let params = NetworkParams::init(&spec).unwrap();
    let example = TrainingExample {
        input: (0..256).map(|i| (i % 7) as f64 / 7.0).collect(),
        target: vec![1.0],
    };
    c.bench_function("dnn_forward_backward_256", |b| {
        b.iter(|| {
            let (_, trace) = forward(black_box(&params), &example.input).unwrap();
            backward(&params, &trace, &example.target).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_fcm,
    bench_resize,
    bench_roc,
    bench_forward_backward
);
criterion_main!(benches);

//! Data-parallel kernels on the default rayon pool against a one-thread pool.
//! Build with `--no-default-features` to time the plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pgmwater::morpho::{kmeans_segment, morphological_profiles};
use pgmwater::spectral::{classify_probabilities, fit_classifier, pca_fuse};
use pgmwater::synth::{generate_scene, SceneSpec};

fn kernels(c: &mut Criterion) {
    let scene = generate_scene(&SceneSpec::default_scene()).expect("scene");
    let model = fit_classifier(&scene.training).expect("model");
    let profiles = morphological_profiles(&scene.pan).expect("profiles");
    let pools = [
        ("default", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("one-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ];

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (name, pool) in &pools {
        group.bench_function(BenchmarkId::new("profiles", name), |b| {
            b.iter(|| pool.install(|| morphological_profiles(&scene.pan).unwrap()))
        });
        group.bench_function(BenchmarkId::new("kmeans_segment", name), |b| {
            b.iter(|| pool.install(|| kmeans_segment(&scene.pan, &profiles, 8, 42).unwrap()))
        });
        group.bench_function(BenchmarkId::new("classify_ms", name), |b| {
            b.iter(|| pool.install(|| classify_probabilities(&model, &scene.ms).unwrap()))
        });
        group.bench_function(BenchmarkId::new("pca_fuse", name), |b| {
            b.iter(|| pool.install(|| pca_fuse(&scene.ms, &scene.pan).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);

//! Sequential vs data-parallel throughput on the three bulk stages:
//! synthetic generation, graph construction, and batch prediction.
//!
//! With the `parallel` feature off, both arms run the sequential path,
//! which makes the comparison a cheap regression check for dispatch
//! overhead; with it on (the default) the parallel arm exercises rayon.

use criterion::{criterion_group, criterion_main, Criterion};

use keystep_core::dataset::Dataset;
use keystep_core::graph::{build_dataset_graphs, BuildOptions, ContextMode, Variant};
use keystep_core::model::{init_params, predict_batch, ModelConfig};
use keystep_core::synth::{generate, SynthConfig};

fn bench_config() -> SynthConfig {
    SynthConfig {
        num_takes: 12,
        segments_per_take: (8, 16),
        num_classes: 6,
        feature_dim_vision: 16,
        feature_dim_text: 8,
        num_exo_views: 2,
        frames_per_segment: (3, 6),
        seed: 77,
        ..SynthConfig::default()
    }
}

fn bench_generate(c: &mut Criterion) {
    let config = bench_config();
    let mut group = c.benchmark_group("generate");
    for (name, parallel) in [("sequential", false), ("parallel", true)] {
        group.bench_function(name, |b| {
            b.iter(|| {
                let dir = tempfile::tempdir().unwrap();
                generate(&config, dir.path(), parallel).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_build_graphs(c: &mut Criterion) {
    let config = bench_config();
    let dir = tempfile::tempdir().unwrap();
    generate(&config, dir.path(), false).unwrap();
    let dataset = Dataset::open(dir.path().join("manifest.json"))
        .unwrap()
        .load_all(false)
        .unwrap();
    let mut group = c.benchmark_group("build_graphs");
    for (name, parallel) in [("sequential", false), ("parallel", true)] {
        group.bench_function(name, |b| {
            b.iter(|| {
                build_dataset_graphs(
                    &dataset,
                    Variant::MultiViewHetero,
                    ContextMode::FullContext,
                    BuildOptions::default(),
                    parallel,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let config = bench_config();
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(&config, dir.path(), false).unwrap();
    let dataset = Dataset::open(dir.path().join("manifest.json"))
        .unwrap()
        .load_all(false)
        .unwrap();
    let graphs: Vec<_> = build_dataset_graphs(
        &dataset,
        Variant::EgoOnly,
        ContextMode::FullContext,
        BuildOptions::default(),
        false,
    )
    .unwrap()
    .into_iter()
    .flatten()
    .collect();
    let model_config = ModelConfig::for_dataset(&manifest, Variant::EgoOnly);
    let params = init_params(&model_config, 1);
    let mut group = c.benchmark_group("predict_batch");
    for (name, parallel) in [("sequential", false), ("parallel", true)] {
        group.bench_function(name, |b| {
            b.iter(|| predict_batch(&graphs, &params, &model_config, parallel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_generate, bench_build_graphs, bench_predict);
criterion_main!(benches);

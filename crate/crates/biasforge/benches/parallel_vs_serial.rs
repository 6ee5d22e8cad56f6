//! Parallel-vs-serial throughput comparison for the three data-parallel
//! hot paths: batch model fitting, scenario injection across replicates,
//! and the per-feature audit battery.
//!
//! The parallel side uses the crate's worker pool (capped by
//! BIASFORGE_THREADS); building with --no-default-features makes both sides
//! serial, which is the expected sanity baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use biasforge::audit::audit_dataset;
use biasforge::data::TabularDataset;
use biasforge::inject::{apply_scenario, BiasScenario, ScenarioKind};
use biasforge::learn::{fit, sample_hyperparams, Algorithm, ModelSpec};
use biasforge::par;
use biasforge::runner::replicate_seed;
use biasforge::synth::{gen_base_dataset, BaseConfig};

fn bench_base() -> TabularDataset {
    gen_base_dataset(&BaseConfig {
        n_rows: 8_000,
        base_prevalence: 0.05,
        n_informative: 4,
        n_noise: 2,
        class_separation: 1.0,
        drift_shift: 0.0,
        drift_fraction: 0.0,
        seed: 42,
    })
    .unwrap()
}

fn injected_train() -> TabularDataset {
    let base = bench_base();
    let (train, test) = base.temporal_split(0.75).unwrap();
    let scenario = BiasScenario {
        kind: ScenarioKind::H21,
        s_a: 0.5,
        c: 2.0,
        scheme: None,
        seed: 7,
    };
    apply_scenario(&train, &test, &scenario).unwrap().0
}

fn fit_batch(c: &mut Criterion) {
    let train = injected_train();
    let specs: Vec<ModelSpec> = sample_hyperparams(Algorithm::Tree, 8, 3).unwrap();
    let mut group = c.benchmark_group("fit_batch_tree_x8");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", 8_000), |b| {
        b.iter(|| {
            let models = par::map(&specs, |spec| fit(spec, &train).unwrap());
            black_box(models.len())
        })
    });
    group.bench_function(BenchmarkId::new("serial", 8_000), |b| {
        b.iter(|| {
            let models = par::map_serial(&specs, |spec| fit(spec, &train).unwrap());
            black_box(models.len())
        })
    });
    group.finish();
}

fn inject_replicates(c: &mut Criterion) {
    let base = bench_base();
    let (train, test) = base.temporal_split(0.75).unwrap();
    let seeds: Vec<u64> = (0..10).map(|r| replicate_seed(9, 0, r)).collect();
    let run = |seed: &u64| {
        let scenario = BiasScenario {
            kind: ScenarioKind::H21,
            s_a: 0.5,
            c: 2.0,
            scheme: None,
            seed: *seed,
        };
        apply_scenario(&train, &test, &scenario).unwrap().2
    };
    let mut group = c.benchmark_group("inject_x10");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&seeds, run).len()))
    });
    group.bench_function("serial", |b| {
        b.iter(|| black_box(par::map_serial(&seeds, run).len()))
    });
    group.finish();
}

fn audit_battery(c: &mut Criterion) {
    let train = injected_train();
    let datasets: Vec<TabularDataset> = (0..4).map(|_| train.clone()).collect();
    let mut group = c.benchmark_group("audit_x4");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&datasets, |ds| audit_dataset(ds, 0.01).unwrap().len()).len()))
    });
    group.bench_function("serial", |b| {
        b.iter(|| {
            black_box(par::map_serial(&datasets, |ds| audit_dataset(ds, 0.01).unwrap().len()).len())
        })
    });
    group.finish();
}

criterion_group!(benches, fit_batch, inject_replicates, audit_battery);
criterion_main!(benches);

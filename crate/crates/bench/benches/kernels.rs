//! Hot-path benchmarks at the benchmark-mixture working size: one walk
//! step, environment sampling, the equilibrium solve, one fixed-point
//! pool pass, and the Wasserstein coupling of two large pools.

use criterion::{criterion_group, criterion_main, Criterion};
use dirmix::degrees::benchmark_mixture;
use dirmix::graphmodel::sample_environment;
use dirmix::limits::{sample_rde, wasserstein1, PoolLabel, PoolMeta, SamplePool};
use dirmix::walk::{equilibrium, step, Distribution, EquilibriumOptions};

fn bench_walk_step(c: &mut Criterion) {
    let seq = benchmark_mixture(15_000).unwrap();
    let env = sample_environment(&seq, 7);
    let dist = Distribution::in_degree(&env);
    c.bench_function("walk_step_n15000", |b| b.iter(|| step(&env, &dist)));
}

fn bench_sample_environment(c: &mut Criterion) {
    let seq = benchmark_mixture(15_000).unwrap();
    let mut seed = 0u64;
    c.bench_function("sample_environment_n15000", |b| {
        b.iter(|| {
            seed += 1;
            sample_environment(&seq, seed)
        })
    });
}

fn bench_equilibrium(c: &mut Criterion) {
    let seq = benchmark_mixture(15_000).unwrap();
    let env = sample_environment(&seq, 7);
    let opts = EquilibriumOptions::default();
    c.bench_function("equilibrium_n15000", |b| b.iter(|| equilibrium(&env, &opts).unwrap()));
}

fn bench_rde_pass(c: &mut Criterion) {
    let seq = benchmark_mixture(15_000).unwrap();
    let mut seed = 0u64;
    c.bench_function("rde_pass_pool10k", |b| {
        b.iter(|| {
            seed += 1;
            sample_rde(&seq, 10_000, 1, seed).unwrap()
        })
    });
}

/// Cheap deterministic noise so the sorts inside the coupling distance see
/// unordered data.
fn noise_pool(seed: u64, len: usize) -> SamplePool {
    let mut state = seed | 1;
    let values = (0..len)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    SamplePool::new(values, PoolLabel::Z, PoolMeta { seed, iterations: 0 }).unwrap()
}

fn bench_wasserstein(c: &mut Criterion) {
    let a = noise_pool(3, 100_000);
    let b_pool = noise_pool(4, 100_000);
    c.bench_function("wasserstein1_100k_vs_100k", |b| b.iter(|| wasserstein1(&a, &b_pool)));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = bench_walk_step,
        bench_sample_environment,
        bench_equilibrium,
        bench_rde_pass,
        bench_wasserstein
}
criterion_main!(kernels);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hbest_bench::{dataset, ma4};
use hbest_core::{aepl, run_chain, EvalGrid, Mode, SamplerConfig};

fn sweeps(c: &mut Criterion) {
    let sim = ma4(8, 500);
    let data = dataset(&sim, 15);
    let mut group = c.benchmark_group("sampler");
    group.sample_size(20);
    for mode in [Mode::Hierarchical, Mode::Common, Mode::Independent] {
        // Two iterations: the initial state plus one full sweep.
        let config = SamplerConfig {
            iterations: 2,
            burn_in: 1,
            mode,
            ..Default::default()
        };
        group.bench_function(format!("one sweep, {mode}, L=8 n=500"), |b| {
            b.iter(|| run_chain(black_box(&data), &config).unwrap())
        });
    }
    group.finish();
}

fn loss(c: &mut Criterion) {
    let sim = ma4(5, 500);
    let data = dataset(&sim, 15);
    let config = SamplerConfig {
        iterations: 300,
        burn_in: 100,
        ..Default::default()
    };
    let chain = run_chain(&data, &config).unwrap();
    let grid = EvalGrid::default();
    let truths = sim.true_log_spectra(&grid.omegas);
    c.bench_function("AEPL 200 samples x 5 replicates x 1000 frequencies", |b| {
        b.iter(|| aepl(black_box(&chain), &truths, &grid).unwrap())
    });
}

criterion_group!(benches, sweeps, loss);
criterion_main!(benches);

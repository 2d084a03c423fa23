use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use quantcons::golden::{example1_config, example2_config};
use quantcons::{
    run, sweep, Algorithm, Digraph, GraphSource, RunConfig, SweepTemplate, Termination, ValueSource,
};

fn golden_examples(c: &mut Criterion) {
    let ex1 = example1_config().unwrap();
    let ex2 = example2_config().unwrap();
    c.bench_function("example1_alg2", |b| {
        b.iter(|| run(black_box(&ex1)).unwrap())
    });
    c.bench_function("example2_alg3", |b| {
        b.iter(|| run(black_box(&ex2)).unwrap())
    });
}

fn single_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_random_digraph");
    for n in [10usize, 20, 40] {
        let graph = Digraph::random_strongly_connected(n, 0.1, 1).unwrap();
        let values: Vec<i64> = (0..n as i64).map(|i| (i * 37) % 101 - 50).collect();
        for alg in Algorithm::ALL {
            let cfg = RunConfig::new(alg, graph.clone(), values.clone())
                .unwrap()
                .with_seed(3)
                .with_termination(Termination::All);
            group.bench_with_input(BenchmarkId::new(alg.as_str(), n), &cfg, |b, cfg| {
                b.iter(|| run(cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_ring20");
    group.sample_size(10);
    let seeds: Vec<u64> = (0..16).collect();
    for alg in Algorithm::ALL {
        let template = SweepTemplate::new(
            alg,
            GraphSource::RingUndirected(20),
            ValueSource::Total {
                total: 480,
                deviation: 25,
                seed: None,
            },
        );
        group.bench_function(alg.as_str(), |b| b.iter(|| sweep(&template, &seeds)));
    }
    group.finish();
}

criterion_group!(benches, golden_examples, single_runs, sweeps);
criterion_main!(benches);

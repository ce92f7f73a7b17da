use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mecplan::harness::ExperimentConfig;
use mecplan::simnet::{simulate, SimOptions};
use mecplan::{load_processor, load_service};

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_30s");
    group.sample_size(10);
    for (service, n) in [("remote_driving", 4), ("cooperative_awareness", 60)] {
        let mut cfg = ExperimentConfig::new(
            load_service(service).unwrap(),
            load_processor("id1").unwrap(),
            n,
            1,
        );
        cfg.duration_s = 30.0;
        cfg.warmup_s = 5.0;
        group.bench_with_input(BenchmarkId::new(service, n), &cfg, |b, cfg| {
            b.iter(|| black_box(simulate(cfg, SimOptions::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, simulation);
criterion_main!(benches);

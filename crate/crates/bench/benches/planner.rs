use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mecplan::{catalog_processors, catalog_services, feasible_vehicle_count, plan};

fn planner(c: &mut Criterion) {
    let services = catalog_services();
    let procs = catalog_processors();
    c.bench_function("plan/catalog", |b| {
        b.iter(|| {
            for s in &services {
                black_box(plan(black_box(s), &procs));
            }
        })
    });
    c.bench_function("feasible_vehicle_count", |b| {
        b.iter(|| feasible_vehicle_count(black_box(&procs[0]), black_box(&services[3])))
    });
}

criterion_group!(benches, planner);
criterion_main!(benches);

use std::hint::black_box;

use coopoffload_bench::two_hop_path;
use coopoffload_core::{delivery_prob_path, DeliveryQuery};
use criterion::{criterion_group, criterion_main, Criterion};

fn bench(c: &mut Criterion) {
    let path = two_hop_path();
    let mut group = c.benchmark_group("delivery_prob_path");
    for size in [5.0, 20.0, 40.0] {
        let q = DeliveryQuery::new(size, 400.0).unwrap();
        group.bench_function(format!("two_hop_s{size}"), |b| {
            b.iter(|| delivery_prob_path(black_box(&path), &q).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

use coopoffload_bench::synthetic;
use coopoffload_core::simulator::generate_tasks;
use coopoffload_core::{simulate_strategy, Strategy, TaskGrid};
use criterion::{criterion_group, criterion_main, Criterion};

fn bench(c: &mut Criterion) {
    let net = synthetic(50);
    let grid = TaskGrid {
        count: 20,
        sizes: vec![20.0],
        deadlines: vec![400.0],
        release_window: 0.0,
    };
    let tasks = generate_tasks(&net, &grid, 7).unwrap();
    let mut group = c.benchmark_group("simulate_20_tasks");
    group.sample_size(10);
    for s in Strategy::ALL {
        group.bench_function(s.as_str(), |b| {
            b.iter(|| simulate_strategy(&net, &tasks, s, 11).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robosched::bench::{generate_instance, run_grid, Category, FamilySpec, GridSpec};
use robosched::milp::{solve_exact, SolveConfig};
use robosched::par;

fn solver_workers(c: &mut Criterion) {
    let inst = generate_instance(&FamilySpec::new(Category::Temporal, 3, 9), 11).unwrap();
    let mut group = c.benchmark_group("solve_exact");
    group.sample_size(10);
    let counts = [1, par::available_workers().max(2)];
    for workers in counts {
        let cfg = SolveConfig::default().with_gap(0.0).with_workers(workers);
        group.bench_with_input(BenchmarkId::new("workers", workers), &cfg, |b, cfg| {
            b.iter(|| solve_exact(&inst, cfg).unwrap())
        });
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let spec = GridSpec::standard(2, 7, 4);
    let mut group = c.benchmark_group("run_grid");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| run_grid(&spec).unwrap()));
    group.bench_function("sequential", |b| b.iter(|| par::sequentially(|| run_grid(&spec).unwrap())));
    group.finish();
}

criterion_group!(benches, solver_workers, grid);
criterion_main!(benches);

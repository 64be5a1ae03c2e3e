use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fepheal::inference::{minimize_free_energy, InferenceProblem, MeanFieldOptions};
use fepheal_bench::{context_evidence, sparse_graph};

fn mean_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("mean_field");
    for d in [25, 50, 100, 200] {
        let g = sparse_graph(d, 11);
        let ev = context_evidence(&g, 12);
        let problem = InferenceProblem::new(&g, &ev).unwrap();
        let opts = MeanFieldOptions { max_sweeps: 1, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("one_sweep", d), &problem, |b, p| {
            b.iter(|| minimize_free_energy(p, None, &opts).unwrap())
        });
        let opts = MeanFieldOptions::default();
        group.bench_with_input(BenchmarkId::new("to_convergence", d), &problem, |b, p| {
            b.iter(|| minimize_free_energy(p, None, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mean_field);
criterion_main!(benches);

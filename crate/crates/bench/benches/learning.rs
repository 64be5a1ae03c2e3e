use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fepheal::cfg::{hill_climb, ClimbOptions, Columns};
use fepheal_bench::{sample_rows, sparse_graph};

fn climb(c: &mut Criterion) {
    let mut group = c.benchmark_group("hill_climb");
    group.sample_size(10);
    for d in [8, 16, 32] {
        let g = sparse_graph(d, 21);
        let rows = sample_rows(&g, 500, 22);
        let data = Columns::from_rows(vec![2; d], &rows);
        let opts = ClimbOptions { restarts: 1, max_parents: 2, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(d), &data, |b, data| {
            b.iter(|| hill_climb(data, None, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, climb);
criterion_main!(benches);

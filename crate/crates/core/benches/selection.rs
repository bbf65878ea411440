//! Selection operators on uniform random error matrices, k = N parents per call.

use std::hint::black_box;

use batchsel::rng::seeded;
use batchsel::selbench::uniform_error_matrix;
use batchsel::selection::Selector;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn selection_operators(c: &mut Criterion) {
    let selectors = ["Tourn/8", "Lex", "Ae-Lex", "BTS/8/16", "BTSS/8/16", "BTS/64/4"];
    let mut group = c.benchmark_group("select_k_eq_n_t256");
    group.sample_size(20);
    for n in [250, 1000] {
        let em = uniform_error_matrix(n, 256, 1).unwrap();
        for id in selectors {
            let selector: Selector = id.parse().unwrap();
            group.bench_with_input(BenchmarkId::new(id, n), &em, |b, em| {
                let mut rng = seeded(2);
                b.iter(|| black_box(selector.select(em, n, &mut rng)));
            });
        }
    }
    group.finish();
}

criterion_group!(benches, selection_operators);
criterion_main!(benches);

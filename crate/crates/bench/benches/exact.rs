use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rainbow_bench::cyclic_latin;
use rainbow_core::exact::{enumerate_oracle, find_full, max_rainbow, Budget};
use rainbow_core::generators::{gen_double_star, gen_two_k4};

fn latin(c: &mut Criterion) {
    let mut group = c.benchmark_group("latin");
    for order in [5, 6, 7] {
        let family = cyclic_latin(order);
        group.bench_with_input(BenchmarkId::new("find_full", order), &family, |b, f| {
            b.iter(|| find_full(black_box(f), Budget::unlimited()))
        });
        group.bench_with_input(BenchmarkId::new("enumerate", order), &family, |b, f| {
            b.iter(|| enumerate_oracle(black_box(f)).unwrap())
        });
    }
    group.finish();
}

fn counterexamples(c: &mut Criterion) {
    let k4 = gen_two_k4();
    c.bench_function("max_rainbow/two_k4", |b| b.iter(|| max_rainbow(black_box(&k4), Budget::unlimited())));
    let star = gen_double_star(6).unwrap();
    c.bench_function("max_rainbow/double_star_6", |b| {
        b.iter(|| max_rainbow(black_box(&star), Budget::unlimited()))
    });
}

criterion_group!(benches, latin, counterexamples);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use looptrace::corpus;
use looptrace::scu::Mode;
use looptrace::semantics::{run, RunOptions, Value};
use looptrace::testgen::{generate, SearchOptions, SearchOrder};

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate");
    for name in ["factorial", "gcd", "binary_search"] {
        let entry = corpus::find(name).unwrap();
        let r = entry.routine().unwrap();
        for depth in [1, entry.max_depth.min(8)] {
            group.bench_with_input(BenchmarkId::new(name, depth), &depth, |b, &n| {
                b.iter(|| {
                    generate(&r, n, &entry.domain, SearchOrder::Lex, Mode::Scu, SearchOptions::default()).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn interpretation(c: &mut Criterion) {
    let r = corpus::find("square_root").unwrap().routine().unwrap();
    let input = [Value::Int(200)];
    c.bench_function("run square_root(200)", |b| {
        b.iter(|| run(&r, black_box(&input), RunOptions::default()).unwrap())
    });
}

criterion_group!(benches, generation, interpretation);
criterion_main!(benches);

// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};

use hwsem::mlir::{parse, print, state::preprocess};
use hwsem_bench::comb_chain;

fn text(c: &mut Criterion) {
    let src = comb_chain(2000, 64);
    let mut group = c.benchmark_group("text");
    group.throughput(Throughput::Bytes(src.len() as u64));
    group.bench_function("parse", |b| b.iter(|| black_box(parse(&src).unwrap())));
    let file = parse(&src).unwrap();
    group.bench_function("print", |b| b.iter(|| black_box(print(&file))));
    group.bench_function("preprocess", |b| {
        b.iter(|| black_box(preprocess(file.clone()).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, text);
criterion_main!(benches);

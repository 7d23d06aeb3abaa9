use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use skychan::analysis::{doppler_spectrum, multipath_delay_stats, power_series};
use skychan::io::{decode_dump, encode_dump};
use skychan_bench::{cluster_set, link, prepared};

fn synthesis(c: &mut Criterion) {
    let p = prepared(0.05, 3);
    c.bench_function("cluster_set", |b| b.iter(|| cluster_set(black_box(7))));
    c.bench_function("link_5000_snapshots", |b| b.iter(|| link(black_box(&p))));
}

fn analysis(c: &mut Criterion) {
    let l = link(&prepared(0.05, 3));
    let t = &l.assembled.tensor;
    c.bench_function("power_series", |b| b.iter(|| power_series(black_box(t))));
    c.bench_function("delay_stats", |b| {
        b.iter(|| multipath_delay_stats(black_box(t), 40.0).unwrap())
    });
    c.bench_function("doppler_spectrum_256", |b| {
        b.iter(|| doppler_spectrum(black_box(t), 2e6, 256, 0.05).unwrap())
    });
}

fn dumps(c: &mut Criterion) {
    let l = link(&prepared(0.05, 3));
    let bytes = encode_dump(&l.assembled.tensor);
    c.bench_function("encode_dump", |b| {
        b.iter(|| encode_dump(black_box(&l.assembled.tensor)))
    });
    c.bench_function("decode_dump", |b| {
        b.iter(|| decode_dump(black_box(&bytes), std::path::Path::new("bench")).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = synthesis, analysis, dumps
}
criterion_main!(benches);

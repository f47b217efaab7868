use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use formprobe_core::decomp::hodge_decompose;
use formprobe_core::grid::GridSpec;
use formprobe_core::probe::generate::band_limited_random;
use formprobe_core::spectral::{coderivative_delta, exterior_d, fourier};

/// `(dim, n)` pairs with comparable node counts.
const SIZES: [(usize, usize); 3] = [(2, 128), (3, 32), (4, 16)];

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    group.sample_size(20);
    for (dim, n) in SIZES {
        let grid = GridSpec::periodic(dim, PI, n).unwrap();
        let e = band_limited_random(grid, 1, 1).unwrap();
        let label = format!("N{dim}_n{n}");
        group.bench_with_input(BenchmarkId::new("fourier", &label), &e, |b, e| b.iter(|| fourier(black_box(e)).unwrap()));
        group.bench_with_input(BenchmarkId::new("d", &label), &e, |b, e| b.iter(|| exterior_d(black_box(e)).unwrap()));
        group.bench_with_input(BenchmarkId::new("delta", &label), &e, |b, e| {
            b.iter(|| coderivative_delta(black_box(e)).unwrap())
        });
    }
    group.finish();
}

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("hodge_decompose");
    group.sample_size(10);
    for (dim, n) in SIZES {
        let grid = GridSpec::periodic(dim, PI, n).unwrap();
        let e = band_limited_random(grid, 1, 2).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("N{dim}_n{n}")), &e, |b, e| {
            b.iter(|| hodge_decompose(black_box(e)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, decomposition);
criterion_main!(benches);

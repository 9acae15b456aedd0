use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use pgsim_bench::{basis, factors, mesh, GAMMA};
use pgsim_core::krylov::Projector;
use pgsim_core::phi::dense_expm;
use pgsim_core::{sparse_lu, BlockLuFactors};

fn factorization(c: &mut Criterion) {
    let mut g = c.benchmark_group("factor");
    for side in [20, 50] {
        let sys = mesh(side, side, 7);
        let shifted = sys.c.add_scaled(1.0, &sys.g, GAMMA).unwrap();
        g.bench_with_input(BenchmarkId::new("sparse_lu", side * side), &shifted, |b, a| {
            b.iter(|| sparse_lu(black_box(a)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("block_lu", side * side), &sys, |b, sys| {
            b.iter(|| BlockLuFactors::factor(black_box(sys), GAMMA).unwrap())
        });
    }
    g.finish();
}

fn substitution(c: &mut Criterion) {
    let sys = mesh(50, 50, 7);
    let (f, v0) = factors(&sys);
    c.bench_function("block_lu_solve/2500", |b| b.iter(|| f.solve(&sys, black_box(&v0)).unwrap()));
}

fn krylov(c: &mut Criterion) {
    let sys = mesh(50, 50, 7);
    let (f, v0) = factors(&sys);
    let mut g = c.benchmark_group("rational_arnoldi");
    for m in [5, 10, 20] {
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| basis(&sys, &f, black_box(&v0), m))
        });
    }
    g.finish();

    let kb = basis(&sys, &f, &v0, 20);
    let p = Projector::new(&kb).unwrap();
    c.bench_function("projector_at/20", |b| b.iter(|| p.at(black_box(10.0)).unwrap()));
}

fn expm(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense_expm");
    for n in [10, 30, 60] {
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -2.0 - i as f64
            } else {
                1.0 / (1.0 + (i + 2 * j) as f64)
            }
        });
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| dense_expm(black_box(a)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, factorization, substitution, krylov, expm);
criterion_main!(benches);

use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use liyau_core::admissibility::{p_bar_sweep, ParamPair, SweepGrid};
use liyau_core::checks::liyau_check;
use liyau_core::geometry::Geometry;
use liyau_core::solver::{evolve, SolverConfig};

fn torus_data(nodes: usize) -> (Geometry, Vec<f64>) {
    let l = 2.0 * PI;
    let g = Geometry::flat_torus(nodes, l).unwrap();
    let u0 = g
        .coords()
        .iter()
        .map(|x| 1.0 + 0.5 * (2.0 * PI * x / l).sin())
        .collect();
    (g, u0)
}

fn laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian");
    for nodes in [512, 8192] {
        let (g, u) = torus_data(nodes);
        let mut out = vec![0.0; nodes];
        group.bench_with_input(BenchmarkId::new("torus", nodes), &nodes, |b, _| {
            b.iter(|| g.laplacian_into(black_box(&u), &mut out))
        });
        let r = Geometry::radial_euclidean(6, nodes, 10.0).unwrap();
        let v: Vec<f64> = r.coords().iter().map(|x| 24.0 / (1.0 + x * x).powi(2)).collect();
        group.bench_with_input(BenchmarkId::new("radial6", nodes), &nodes, |b, _| {
            b.iter(|| r.laplacian_into(black_box(&v), &mut out))
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let (g, u0) = torus_data(256);
    let cfg = SolverConfig::new(1.5, 1e-3, 0.1, Some(0.5));
    c.bench_function("evolve_torus256_t0.5", |b| {
        b.iter(|| evolve(&g, black_box(&u0), &cfg).unwrap())
    });
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("p_bar_sweep");
    group.sample_size(10);
    for n in [3, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| p_bar_sweep(n, &SweepGrid::default()).unwrap())
        });
    }
    group.finish();
}

fn checks(c: &mut Criterion) {
    let (g, u0) = torus_data(512);
    let sol = evolve(&g, &u0, &SolverConfig::new(1.5, 1e-3, 0.01, Some(0.9))).unwrap();
    let pair = ParamPair::new(1.0, 2.0 / 3.0).unwrap();
    c.bench_function("liyau_check_torus512", |b| {
        b.iter(|| liyau_check(&sol, pair, (0.0, 0.9)).unwrap())
    });
}

criterion_group!(benches, laplacian, solver, sweep, checks);
criterion_main!(benches);

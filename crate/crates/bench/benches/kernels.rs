use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magpsido::decay::{conjugate_operator, WeightFamily};
use magpsido::gauge::transversal_gauge;
use magpsido::relativistic::{bessel_k, kato_estimate, kernel_pt, BesselOrder};
use magpsido::spectral::eig_hermitian;
use magpsido::{op_weyl, GaugeData, Grid, MagneticField, PotentialSpec, SymbolCatalog};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("op_weyl");
    let sym = SymbolCatalog::relativistic(1);
    for n in [128, 256, 512] {
        let grid = Grid::new(1, 30.0, n).unwrap();
        group.bench_with_input(BenchmarkId::new("relativistic_1d", n), &grid, |b, grid| {
            b.iter(|| op_weyl(&sym, &GaugeData::free(1), black_box(grid)).unwrap())
        });
    }
    let sym2 = SymbolCatalog::relativistic(2);
    let g = transversal_gauge(&MagneticField::constant_2d(1.0));
    for n in [16, 24] {
        let grid = Grid::new(2, 4.0, n).unwrap();
        group.bench_with_input(BenchmarkId::new("relativistic_2d_b1", n), &grid, |b, grid| {
            b.iter(|| op_weyl(&sym2, &g, black_box(grid)).unwrap())
        });
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    group.sample_size(10);
    let sym = SymbolCatalog::relativistic(1)
        .with_potential(PotentialSpec::gauss_well(2.0, 1.0))
        .unwrap();
    for n in [128, 256] {
        let grid = Grid::new(1, 30.0, n).unwrap();
        let h = op_weyl(&sym, &GaugeData::free(1), &grid).unwrap().hermitize();
        group.bench_with_input(BenchmarkId::new("eig_hermitian", n), &h, |b, h| {
            b.iter(|| eig_hermitian(black_box(h)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("conjugate_exp", n), &h, |b, h| {
            b.iter(|| conjugate_operator(black_box(h), &WeightFamily::exponential(), 0.1).unwrap())
        });
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    c.bench_function("bessel_k_half", |b| {
        b.iter(|| bessel_k(BesselOrder::half_integer(0), black_box(1.3)).unwrap())
    });
    c.bench_function("bessel_k_one", |b| {
        b.iter(|| bessel_k(BesselOrder::integer(1), black_box(1.3)).unwrap())
    });
    c.bench_function("kernel_pt_1d", |b| {
        b.iter(|| kernel_pt(black_box(0.5), &[black_box(2.0)]).unwrap())
    });
    let grid = Grid::new(1, 20.0, 256).unwrap();
    let w = PotentialSpec::parse("bounded_bump")
        .unwrap()
        .node_values(&grid)
        .unwrap()
        .0;
    c.bench_function("kato_estimate_256", |b| {
        b.iter(|| kato_estimate(black_box(&w), 1.0, &grid).unwrap())
    });
}

criterion_group!(benches, assembly, spectral, kernels);
criterion_main!(benches);

use std::f64::consts::FRAC_PI_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kicked_tops::coupled::CoupledEvolution;
use kicked_tops::perturbation::{correlation_matrix, product_correlation};
use kicked_tops::spin::wigner_d;
use kicked_tops::{CoherentParams, CorrelationLabel, CoupledParams, CoupledState, SpinBasis, TopParams};

fn kernels(c: &mut Criterion) {
    let basis = SpinBasis::new(80.0).unwrap();
    let start = CoherentParams::new(0.89, 0.63).unwrap();

    c.bench_function("wigner_d j=80", |b| {
        b.iter(|| wigner_d(black_box(basis), FRAC_PI_2).unwrap())
    });

    let params = CoupledParams::new(basis, 3.0, 3.0, 1e-4).unwrap();
    let mut evolution = CoupledEvolution::new(&params);
    let mut state = CoupledState::coherent_product(basis, start, start);
    c.bench_function("coupled step j=80", |b| {
        b.iter(|| evolution.step(black_box(&mut state)).unwrap())
    });
    c.bench_function("von Neumann entropy j=80", |b| {
        b.iter(|| black_box(&state).von_neumann_entropy().unwrap())
    });

    let top = TopParams::new(basis, 3.0).unwrap();
    let mut group = c.benchmark_group("correlation");
    group.sample_size(10);
    group.bench_function("C(l,m) j=80 T=128", |b| {
        b.iter(|| correlation_matrix(&top, black_box(start), 128, CorrelationLabel::Top1).unwrap())
    });
    let c1 = correlation_matrix(&top, start, 128, CorrelationLabel::Top1).unwrap();
    let c2 = correlation_matrix(&top, start, 128, CorrelationLabel::Top2).unwrap();
    group.bench_function("D = C1 C2 T=128", |b| {
        b.iter(|| product_correlation(black_box(&c1), &c2).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);

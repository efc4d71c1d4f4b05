use criterion::{criterion_group, criterion_main, Criterion};
use ifsdens_bench::{two_branch_cosine, two_branch_uniform};
use ifsdens_core::*;
use std::hint::black_box;

fn operator_benches(c: &mut Criterion) {
    let grid = Grid::new(4001).unwrap();
    let quad = QuadratureSpec::default();
    let phi = GridFunction::from_fn(grid, |x| 1.0 + 0.3 * (std::f64::consts::PI * x).cos());

    let uniform = two_branch_uniform();
    c.bench_function("apply_l_uniform_n4001", |b| {
        b.iter(|| apply_l(black_box(&uniform), black_box(&phi), &quad).unwrap())
    });
    c.bench_function("apply_u_uniform_n4001", |b| {
        b.iter(|| apply_u(black_box(&uniform), black_box(&phi), &quad).unwrap())
    });

    let cosine = two_branch_cosine();
    c.bench_function("apply_l_cosine_n4001", |b| {
        b.iter(|| apply_l(black_box(&cosine), black_box(&phi), &quad).unwrap())
    });
}

fn cone_benches(c: &mut Criterion) {
    let grid = Grid::new(1001).unwrap();
    let rho1 = GridFunction::from_fn(grid, |x| (0.2 * x).exp()).normalized().unwrap();
    let rho2 = GridFunction::from_fn(grid, |x| (0.45 * (1.0 - x.abs())).exp())
        .normalized()
        .unwrap();
    c.bench_function("theta_d_exhaustive_n1001", |b| {
        b.iter(|| theta_d(black_box(&rho1), black_box(&rho2), 0.5, 1.0).unwrap())
    });
}

fn solver_benches(c: &mut Criterion) {
    let grid = Grid::new(1001).unwrap();
    let quad = QuadratureSpec::default();
    let sys = two_branch_uniform();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("solve_density_n1001", |b| {
        b.iter(|| {
            solve_density(
                black_box(&sys),
                grid,
                &quad,
                &SolveOptions {
                    tol: 1e-10,
                    ..Default::default()
                },
            )
            .unwrap()
        })
    });
    group.finish();
}

fn oracle_benches(c: &mut Criterion) {
    let sys = two_branch_cosine();
    c.bench_function("sample_chain_100k_cosine", |b| {
        b.iter(|| sample_chain(black_box(&sys), 100_000, 1000, 42).unwrap())
    });
}

criterion_group!(benches, operator_benches, cone_benches, solver_benches, oracle_benches);
criterion_main!(benches);

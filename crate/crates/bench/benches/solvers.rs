use criterion::{criterion_group, criterion_main, Criterion};
use hlab_bench::*;
use hlab_core::*;

fn capacity(c: &mut Criterion) {
    c.bench_function("harmonic_capacity_numeric_n3", |b| {
        b.iter(|| harmonic_capacity(1.0, 3, CapacityMethod::Numeric).unwrap())
    });
}

fn cell(c: &mut Criterion) {
    let problem = cell_problem();
    c.bench_function("cell_corrector_eps_half", |b| {
        b.iter(|| solve_cell_corrector(&problem, 1e-8, 4).unwrap())
    });
}

fn heat(c: &mut Criterion) {
    let grid = heat_grid().unwrap();
    let g = heat_data(&grid);
    let rcfg = heat_run(&grid);
    let obstacle = ConstObstacle(1.5);
    let mut group = c.benchmark_group("heat_obstacle");
    group.sample_size(10);
    group.bench_function("projected", |b| {
        b.iter(|| solve_obstacle_heat_projected(&grid, &obstacle, &g, &rcfg).unwrap())
    });
    group.bench_function("homogenized", |b| {
        b.iter(|| solve_homogenized_heat(&grid, &obstacle, &g, 2.0, &rcfg).unwrap())
    });
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let prob = eigen_problem().unwrap();
    let mut group = c.benchmark_group("eigen");
    group.sample_size(10);
    group.bench_function("perforated_monotone_iteration", |b| {
        b.iter(|| solve_eigen_perforated(&prob).unwrap())
    });
    group.finish();
}

fn pme(c: &mut Criterion) {
    let prob = pme_problem().unwrap();
    let mut group = c.benchmark_group("pme");
    group.sample_size(10);
    group.bench_function("density_form", |b| b.iter(|| solve_pme_perforated(&prob).unwrap()));
    group.finish();
}

criterion_group!(benches, capacity, cell, heat, eigen, pme);
criterion_main!(benches);

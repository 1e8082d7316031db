use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use jcas_bench::reference_fixture;
use jcas_core::{
    eigenmode_precoder, run_algorithm1, solve_radar_covariance, solve_rcg, BeamGrid, RcgSettings,
};

fn covariance(c: &mut Criterion) {
    let (cfg, _) = reference_fixture();
    let grid = BeamGrid::new(&cfg).unwrap();
    c.bench_function("radar_covariance_k0", |b| {
        b.iter(|| solve_radar_covariance(&grid, &cfg, black_box(0)).unwrap())
    });
}

fn eigenmode(c: &mut Criterion) {
    let (cfg, channels) = reference_fixture();
    c.bench_function("eigenmode_precoder", |b| {
        b.iter(|| eigenmode_precoder(black_box(&channels.matrices[0]), &cfg).unwrap())
    });
}

fn rcg(c: &mut Criterion) {
    let (cfg, channels) = reference_fixture();
    let grid = BeamGrid::new(&cfg).unwrap();
    let r = solve_radar_covariance(&grid, &cfg, 0).unwrap().matrix;
    let f_hat = eigenmode_precoder(&channels.matrices[0], &cfg).unwrap().precoder;
    let settings = RcgSettings::default();
    c.bench_function("rcg_single_subcarrier", |b| {
        b.iter(|| {
            solve_rcg(&f_hat, &r, &f_hat, black_box(cfg.rho), cfg.design_power(), &settings).unwrap()
        })
    });
}

fn full_design(c: &mut Criterion) {
    let (cfg, channels) = reference_fixture();
    let mut group = c.benchmark_group("design");
    group.sample_size(10);
    group.bench_function("run_algorithm1_reference", |b| {
        b.iter(|| run_algorithm1(black_box(&channels), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, covariance, eigenmode, rcg, full_design);
criterion_main!(benches);

use std::hint::black_box;
use std::sync::Arc;

use anneal_core::barriers::{c_star, GridSpec};
use anneal_core::fokker_planck::{evolve, stable_dt, Boundary, DensityGrid, EvolveOptions, FpGrid};
use anneal_core::potentials::builtin_default;
use anneal_core::rng::PathSeed;
use anneal_core::sde::{self, SimConfig};
use anneal_core::spectral::{assemble, spectral_gap};
use anneal_core::{BetaSchedule, CoolingSchedule, StepPolicy, TorusSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn simulate(c: &mut Criterion) {
    let dw = builtin_default("double_well_1d").unwrap();
    let sched: BetaSchedule = CoolingSchedule::new(2.0, 1.0).unwrap().into();
    let cfg = SimConfig::new(10.0, StepPolicy::default());
    c.bench_function("simulate double well, T=10", |b| {
        b.iter(|| sde::simulate(&dw, &sched, black_box(&[-1.0]), &cfg, PathSeed::new(1, 0)))
    });
}

fn barriers(c: &mut Criterion) {
    let p = builtin_default("double_well_2d").unwrap();
    let grid = GridSpec::cube(-2.0, 2.0, 2, 256).unwrap();
    let vals = grid.sample(&p).unwrap();
    c.bench_function("c_star 256x256 grid", |b| b.iter(|| c_star(&grid, black_box(&vals)).unwrap()));
}

fn spectral(c: &mut Criterion) {
    let ts = TorusSpec::new(Arc::new(builtin_default("double_well_1d").unwrap()), 5.0, 3.0, 0.1).unwrap();
    c.bench_function("spectral gap n=512 beta=8", |b| {
        b.iter(|| spectral_gap(&assemble(&ts, black_box(8.0), 512).unwrap()).unwrap())
    });
}

fn fokker_planck(c: &mut Criterion) {
    let dw = builtin_default("double_well_1d").unwrap();
    let grid = FpGrid::new(-2.5, 2.5, 400, Boundary::NoFlux).unwrap();
    let f0 = DensityGrid::gaussian(grid, -1.0, 0.2).unwrap();
    let sched: BetaSchedule = CoolingSchedule::new(2.0, 2.0).unwrap().into();
    let dt = stable_dt(&grid, &dw, 2.0, sched.beta_at(1.0)).unwrap();
    c.bench_function("fp evolve 400 cells to t=1", |b| {
        b.iter(|| evolve(&f0, &dw, &sched, 1.0, dt, &EvolveOptions::default()).unwrap())
    });
}

criterion_group!(benches, simulate, barriers, spectral, fokker_planck);
criterion_main!(benches);

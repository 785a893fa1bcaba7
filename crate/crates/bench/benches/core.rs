use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncd_bench::{dense_single_mode, diosi, vacuum_two_photon, werner};
use ncd_core::depth::{depth, MinSearchConfig};
use ncd_core::entanglement::{ncde, negativity, NcdeConfig};
use ncd_core::scaling::{detect_at, lambda_map};
use ncd_core::{regularize, CoherentPoint};

fn regularisation(c: &mut Criterion) {
    let mut g = c.benchmark_group("regularize");
    for dim in [8, 16, 32] {
        let rho = dense_single_mode(dim);
        g.bench_with_input(BenchmarkId::from_parameter(dim), &rho, |b, rho| b.iter(|| regularize(rho, 0.7).unwrap()));
    }
    g.finish();
    let pg = regularize(&werner(0.5), 0.8).unwrap();
    let z = CoherentPoint::new(vec![ncd_core::C64::new(0.3, -0.2), ncd_core::C64::new(-0.1, 0.4)]);
    c.bench_function("eval werner", |b| b.iter(|| pg.eval(&z).unwrap()));
}

fn scaling(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda_map");
    for dim in [8, 16, 32] {
        let rho = dense_single_mode(dim);
        g.bench_with_input(BenchmarkId::from_parameter(dim), &rho, |b, rho| b.iter(|| lambda_map(rho, 0.9).unwrap()));
    }
    g.finish();
    let cfg = MinSearchConfig::default();
    let state = diosi();
    c.bench_function("detect diosi a=2", |b| b.iter(|| detect_at(&state, 2.0, &cfg).unwrap()));
}

fn depths(c: &mut Criterion) {
    let cfg = MinSearchConfig::default();
    let mut g = c.benchmark_group("depth");
    g.sample_size(10);
    let rho_eps = vacuum_two_photon(0.1);
    g.bench_function("vacuum two-photon", |b| b.iter(|| depth(&rho_eps, &cfg).unwrap()));
    let w = werner(0.5);
    g.bench_function("werner 0.5", |b| b.iter(|| depth(&w, &cfg).unwrap()));
    g.finish();
}

fn entanglement(c: &mut Criterion) {
    let w = werner(0.8);
    c.bench_function("negativity werner", |b| b.iter(|| negativity(&w).unwrap()));
    let mut g = c.benchmark_group("ncde");
    g.sample_size(10);
    let cfg = NcdeConfig { tau_sigma_grid: vec![0.9, 1.0], ..NcdeConfig::default() };
    let rho = ncd_core::entanglement::werner_state(0.8, 2).unwrap();
    g.bench_function("werner 0.8, two ansatz points", |b| b.iter(|| ncde(&rho, Some(0.8), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, regularisation, scaling, depths, entanglement);
criterion_main!(benches);

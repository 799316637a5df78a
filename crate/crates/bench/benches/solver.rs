use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use smoothcert::mcbounds::{clopper_pearson, estimate_votes};
use smoothcert::radius::{certified_radius, scalar_optimize};
use smoothcert::rng::seeded;
use smoothcert::{Activation, DenseNetwork, NoiseSpec, Norm, RadiusSolverConfig, Side};

fn forward(c: &mut Criterion) {
    let net = DenseNetwork::new(&[32, 64, 64, 10], Activation::Relu, 1).unwrap();
    let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("forward_32x64x64x10", |b| b.iter(|| net.forward(black_box(&x)).unwrap()));
    let spec = NoiseSpec::gaussian(0.5, 32).unwrap();
    c.bench_function("votes_n1000", |b| {
        b.iter(|| estimate_votes(&net, black_box(&x), &spec, 1000, &mut seeded(2)).unwrap())
    });
}

fn clopper_pearson_bounds(c: &mut Criterion) {
    c.bench_function("clopper_pearson_lower", |b| {
        b.iter(|| clopper_pearson(black_box(873), black_box(1000), 0.999, Side::Lower).unwrap())
    });
}

fn scalar(c: &mut Criterion) {
    let spec = NoiseSpec::exp_power(1.5, 1.0, 8).unwrap();
    let cfg = RadiusSolverConfig::default();
    let dir: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
    c.bench_function("scalar_optimize_d8", |b| {
        b.iter(|| scalar_optimize(black_box(&dir), 0.9, 0.1, &spec, &cfg, &mut seeded(3)).unwrap())
    });
}

fn radius(c: &mut Criterion) {
    let mut group = c.benchmark_group("certified_radius");
    group.sample_size(10);
    for (name, spec) in [
        ("gaussian_d2", NoiseSpec::gaussian(1.0, 2).unwrap()),
        ("exp_power_d8", NoiseSpec::exp_power(1.5, 1.0, 8).unwrap()),
    ] {
        for norm in Norm::ALL {
            let cfg = RadiusSolverConfig { norm, ..Default::default() };
            group.bench_function(format!("{name}_{}", norm.name()), |b| {
                b.iter(|| certified_radius(0.9, 0.1, &spec, &cfg, &mut seeded(4)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, forward, clopper_pearson_bounds, scalar, radius);
criterion_main!(benches);

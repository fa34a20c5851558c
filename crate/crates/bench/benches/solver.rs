use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use elloc_bench::fixture;
use elloc_core::energy::{GradientFlow, LpnnFlow, RnfFlow};
use elloc_core::metrics::crlb;
use elloc_core::noise::{NoiseModel, DEFAULT_K2};
use elloc_core::solver::{solve_lpnn, solve_rnfnn, SolverConfig};

fn bench_derivatives(c: &mut Criterion) {
    let mut group = c.benchmark_group("derivative");
    for name in ["scenario1-2d", "scenario2-3d"] {
        let (scenario, meas) = fixture(name, 20.0, 1);
        let rnf = RnfFlow::new(&scenario, &meas, 5.0);
        let mut x: Vec<f64> = (0..rnf.state_len())
            .map(|i| 0.1 * i as f64 + 50.0)
            .collect();
        x[0] = 40.0;
        let mut out = vec![0.0; x.len()];
        group.bench_function(format!("rnfnn/{name}"), |b| {
            b.iter(|| {
                rnf.derivative_into(black_box(&x), &mut out);
                black_box(&out);
            })
        });

        let lpnn = LpnnFlow::new(&scenario, &meas, 0.05);
        let y: Vec<f64> = (0..lpnn.state_len())
            .map(|i| 0.1 * i as f64 + 50.0)
            .collect();
        let mut out = vec![0.0; y.len()];
        group.bench_function(format!("lpnn/{name}"), |b| {
            b.iter(|| {
                lpnn.derivative_into(black_box(&y), &mut out);
                black_box(&out);
            })
        });
    }
    group.finish();
}

fn bench_full_solve(c: &mut Criterion) {
    let (scenario, meas) = fixture("scenario1-2d", 20.0, 2);
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    group.bench_function("rnfnn/scenario1-2d@20dB", |b| {
        b.iter(|| black_box(solve_rnfnn(&meas, &scenario, &cfg, 7).unwrap()))
    });
    group.bench_function("mlpnn/scenario1-2d@20dB", |b| {
        b.iter(|| black_box(solve_lpnn(&meas, &scenario, &cfg, 7).unwrap()))
    });
    group.finish();
}

fn bench_crlb(c: &mut Criterion) {
    let (scenario, _) = fixture("scenario2-3d", 10.0, 3);
    let noise = NoiseModel::from_snr(&scenario, 10.0, DEFAULT_K2).unwrap();
    c.bench_function("crlb/scenario2-3d", |b| {
        b.iter(|| black_box(crlb(&scenario, &noise).unwrap()))
    });
}

criterion_group!(benches, bench_derivatives, bench_full_solve, bench_crlb);
criterion_main!(benches);

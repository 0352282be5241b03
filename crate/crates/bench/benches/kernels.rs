use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ldrate::{
    action_gradient, builtin_model, continuous_action, discrete_action, minimize_action,
    sample_terminal, ActionSpec, GridPath, MinimizeOptions, Quadrature, SimConfig,
};

fn wavy_path(steps: usize) -> GridPath {
    let nodes = (0..=steps)
        .map(|n| {
            let t = n as f64 / steps as f64;
            1.5 * t + 0.2 * (std::f64::consts::PI * t).sin()
        })
        .collect();
    GridPath::new(1.0, steps, 1, nodes).unwrap()
}

fn actions(c: &mut Criterion) {
    let m = builtin_model("mult-sine").unwrap().model;
    let mut group = c.benchmark_group("action");
    for steps in [256, 2048] {
        let path = wavy_path(steps);
        group.bench_with_input(BenchmarkId::new("continuous_gl2", steps), &path, |b, p| {
            b.iter(|| continuous_action(&m, black_box(p), Quadrature::GaussLegendre2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("discrete", steps), &path, |b, p| {
            b.iter(|| discrete_action(&m, black_box(p), 0.5, 64).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gradient_gl2", steps), &path, |b, p| {
            b.iter(|| action_gradient(&ActionSpec::continuous(), &m, black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn minimization(c: &mut Criterion) {
    let opts = MinimizeOptions::default();
    let mut group = c.benchmark_group("minimize");
    for name in ["ou-additive(-1)", "mult-sine"] {
        let m = builtin_model(name).unwrap().model;
        for steps in [256, 2048] {
            group.bench_function(BenchmarkId::new(name, steps), |b| {
                b.iter(|| {
                    minimize_action(&ActionSpec::continuous(), &m, &[0.0], &[1.5], 1.0, steps, &opts)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_terminal");
    group.sample_size(20);
    for (name, theta) in [("ou-additive(-1)", 0.0), ("mult-sine", 1.0)] {
        let m = builtin_model(name).unwrap().model;
        let mut cfg = SimConfig::new(m, vec![0.0], 1.0, 64);
        cfg.theta = theta;
        cfg.epsilon = 0.1;
        cfg.samples = 10_000;
        group.bench_function(BenchmarkId::new(name, theta), |b| {
            b.iter(|| sample_terminal(black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, actions, minimization, sampling);
criterion_main!(benches);

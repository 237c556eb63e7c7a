use cida_bench::{benchmark_config, benchmark_costs, benchmark_particles};
use cida_core::{
    cida_step, qp_safety_filter, HeadingTrackingPolicy, RngStream, StochasticModel, StreamId,
    StreamPurpose,
};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_qp(c: &mut Criterion) {
    let config = benchmark_config(1);
    c.bench_function("qp_safety_filter", |b| {
        b.iter(|| {
            qp_safety_filter(black_box([0.0, -5.0]), black_box([10.0, 0.0]), &config.safe_set)
                .unwrap()
        })
    });
}

fn bench_filter_cycle(c: &mut Criterion) {
    let config = benchmark_config(1);
    let particles = benchmark_particles(&config);
    let control = cida_core::ControlVec::scalar(0.5).unwrap();
    let stream = RngStream::root(7).child(StreamId::of(StreamPurpose::Test));
    c.bench_function("filter_cycle_1000_particles", |b| {
        b.iter(|| {
            let predicted = particles.time_update(&control, &config.model, &stream);
            let weights = predicted.measurement_weights(&[9.5, -0.5], &config.model);
            let resampled = predicted.resample(&weights, &stream);
            black_box(resampled.conditional_mean())
        })
    });
}

fn bench_cida_step(c: &mut Criterion) {
    let config = benchmark_config(1);
    let particles = benchmark_particles(&config);
    let costs = benchmark_costs(&config);
    let policy = HeadingTrackingPolicy::new(
        config.safe_set.clone(),
        config.field,
        config.model.params().speed,
        config.policy_gain,
        config.model.control_bounds().clone(),
    )
    .unwrap();
    let stream = RngStream::root(1).child(StreamId::step(StreamPurpose::ControlSearch, 0));
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    group.bench_function("cida_step_full_benchmark", |b| {
        b.iter(|| {
            cida_step(
                &particles,
                &policy,
                &config.model,
                &config.safe_set,
                &costs,
                &config.cida,
                black_box(&stream),
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_qp, bench_filter_cycle, bench_cida_step);
criterion_main!(benches);

//! Shared fixtures for the pipeline benchmarks: the obstacle-avoidance
//! benchmark configuration and the states it starts from.

use cida_core::{
    ControllerKind, ParticleSet, RngStream, SimulationConfig, StageCostSpec, StreamId,
    StreamPurpose,
};

/// The full-size benchmark configuration (1000 particles, 150 rollouts on
/// 150 scenarios over a 10-step horizon).
pub fn benchmark_config(seed: u64) -> SimulationConfig {
    SimulationConfig::benchmark(seed, ControllerKind::Cida)
}

/// Particle cloud drawn from the benchmark's initial distribution.
pub fn benchmark_particles(config: &SimulationConfig) -> ParticleSet {
    let root = RngStream::root(config.seed);
    ParticleSet::sample_init(
        config.particles,
        &config.init,
        &root.child(StreamId::of(StreamPurpose::ParticleInit)),
    )
    .expect("benchmark particle cloud")
}

/// Stage cost used by the closed-loop harness.
pub fn benchmark_costs(config: &SimulationConfig) -> StageCostSpec {
    StageCostSpec::orbit_tracking(config.field.radius)
}

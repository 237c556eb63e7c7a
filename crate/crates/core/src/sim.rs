//! Closed-loop benchmark harness: unicycle truth simulation, particle
//! filtering, either controller in the loop, and paired-seed comparisons
//! under common random numbers.

use crate::cida::{cida_step, CidaConfig, CidaError, StageCostSpec, StepDiagnostics};
use crate::dynamics::{StochasticModel, UnicycleModel, UnicycleParams};
use crate::particle_filter::ParticleSet;
use crate::rng::{RngStream, StreamId, StreamPurpose};
use crate::safety::{
    CircularBarrier, ControlPolicy, HeadingTrackingPolicy, OrbitFieldParams, PolicyError,
    SafeSetSpec, StateConstraint,
};
use crate::types::{ControlBounds, ControlVec, DiagGaussian, ParamError, StateVec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Safety-filtered heading tracking applied at the particle mean.
    CertaintyEquivalence,
    /// Full randomized search over candidate control sequences.
    Cida,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControllerKind::CertaintyEquivalence => write!(f, "certainty_equivalence"),
            ControllerKind::Cida => write!(f, "cida"),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("controller failed at step {step}: {source}")]
    Policy { step: usize, source: PolicyError },
    #[error("control search failed at step {step}: {source}")]
    Search { step: usize, source: CidaError },
    #[error("particle filter diverged at step {step}: non-finite particles")]
    FilterDiverged { step: usize },
    #[error("thread pool construction failed: {0}")]
    ThreadPool(String),
}

/// Full description of one closed-loop run.
#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub model: UnicycleModel,
    pub safe_set: SafeSetSpec,
    pub field: OrbitFieldParams,
    /// Proportional gain of the heading-tracking policy.
    pub policy_gain: f64,
    /// Initial distribution shared by the true state and the particle cloud.
    pub init: DiagGaussian,
    pub particles: usize,
    pub steps: usize,
    pub controller: ControllerKind,
    pub cida: CidaConfig,
    pub seed: u64,
    /// Worker threads for this run; `None` uses the ambient pool. The
    /// result never depends on this setting.
    pub threads: Option<usize>,
    /// Keep a copy of the particle cloud at every step.
    pub record_particles: bool,
}

impl SimulationConfig {
    /// The obstacle-avoidance benchmark: a unicycle at 5 m/s with a 0.2 s
    /// period orbiting a 10 m circle among three obstacles, 1000 particles,
    /// a 10-step horizon, and 150 rollouts evaluated on 150 scenarios each.
    pub fn benchmark(seed: u64, controller: ControllerKind) -> Self {
        use crate::types::ChanceParams;
        use std::f64::consts::{FRAC_PI_2, PI};
        let model = UnicycleModel::new(
            UnicycleParams::new(0.2, 5.0).expect("benchmark period and speed"),
            DiagGaussian::centered(vec![0.2, 0.2, 0.1]).expect("benchmark process noise"),
            DiagGaussian::centered(vec![0.1, 0.1]).expect("benchmark measurement noise"),
            ControlBounds::symmetric_scalar(PI).expect("benchmark turn-rate bounds"),
        )
        .expect("benchmark model");
        let safe_set = SafeSetSpec::new(
            vec![
                CircularBarrier::new([9.0, -5.0], 3.0).expect("benchmark obstacle"),
                CircularBarrier::new([-10.0, -9.0], 4.0).expect("benchmark obstacle"),
                CircularBarrier::new([-7.0, 10.0], 3.0).expect("benchmark obstacle"),
            ],
            0.05,
        )
        .expect("benchmark safe set");
        let field = OrbitFieldParams::new(10.0, 0.3).expect("benchmark orbit");
        let chance = ChanceParams::new(0.15, 0.05, 0.05, 150, 150, 10, 1.0)
            .expect("benchmark chance parameters");
        let cida = CidaConfig::new(chance, crate::cida::ConstraintMode::Soft, 1.0)
            .expect("benchmark search config");
        let init = DiagGaussian::new(vec![10.0, 0.0, -FRAC_PI_2], vec![0.2, 0.2, 0.2])
            .expect("benchmark initial distribution");
        Self {
            model,
            safe_set,
            field,
            policy_gain: 5.0,
            init,
            particles: 1000,
            steps: 750,
            controller,
            cida,
            seed,
            threads: None,
            record_particles: false,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.init.dim() != 3 {
            return Err(ParamError::LengthMismatch {
                context: "initial distribution",
                a: self.init.dim(),
                b: 3,
            });
        }
        if self.particles == 0 || self.steps == 0 {
            return Err(ParamError::Invalid {
                context: "simulation",
                detail: "particle count and step count must be positive".into(),
            });
        }
        if !(self.policy_gain.is_finite() && self.policy_gain > 0.0) {
            return Err(ParamError::Invalid {
                context: "simulation",
                detail: format!("policy gain must be positive (got {})", self.policy_gain),
            });
        }
        if self.threads == Some(0) {
            return Err(ParamError::Invalid {
                context: "simulation",
                detail: "thread count must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One logged step: the true state and the filter estimate the controller
/// acted on, the applied control, and whether the true state was unsafe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: usize,
    pub state: StateVec,
    pub estimate: StateVec,
    pub control: ControlVec,
    pub violated: bool,
}

/// Everything a closed-loop run produces. States are logged at steps
/// `0..steps`; the state reached after the final control is not recorded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetrics {
    pub controller: ControllerKind,
    pub seed: u64,
    pub steps: usize,
    pub violation_count: usize,
    pub violation_steps: Vec<usize>,
    /// Sum of the orbit-tracking stage cost over the logged states.
    pub total_cost: f64,
    pub mean_step_seconds: f64,
    pub per_step_seconds: Vec<f64>,
    /// Order-sensitive digests of the noise actually injected; equal digests
    /// across runs certify common random numbers.
    pub truth_noise_digest: u64,
    pub measurement_noise_digest: u64,
    /// Steps whose measurement update underflowed to uniform weights.
    pub degenerate_weight_steps: Vec<usize>,
    pub trajectory: Vec<TrajectoryRow>,
    /// Per-step search records; empty for the certainty-equivalence
    /// controller.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub search_diagnostics: Vec<StepDiagnostics>,
    /// Per-step particle clouds, recorded only on request.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub particle_clouds: Vec<Vec<StateVec>>,
}

impl RunMetrics {
    pub fn violation_rate(&self) -> f64 {
        self.violation_count as f64 / self.steps as f64
    }
}

fn absorb_f64(acc: u64, values: &[f64]) -> u64 {
    let mut a = acc;
    for v in values {
        a = (a.rotate_left(13) ^ v.to_bits()).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    }
    a
}

/// Runs the filter-in-the-loop simulation and returns its metrics.
///
/// All randomness is keyed off `config.seed`. Truth and measurement noise
/// streams do not depend on the controller, so paired runs with different
/// controllers face identical disturbances.
pub fn run_closed_loop(config: &SimulationConfig) -> Result<RunMetrics, SimError> {
    config.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn run_inner(config: &SimulationConfig) -> Result<RunMetrics, SimError> {
    let root = RngStream::root(config.seed);
    let model = &config.model;
    let policy = HeadingTrackingPolicy::new(
        config.safe_set.clone(),
        config.field,
        model.params().speed,
        config.policy_gain,
        model.control_bounds().clone(),
    )?;
    let costs = StageCostSpec::orbit_tracking(config.field.radius);

    let mut truth = StateVec::new(config.init.sample(&root.child(StreamId::of(StreamPurpose::TruthInit))))?;
    let mut particles = ParticleSet::sample_init(
        config.particles,
        &config.init,
        &root.child(StreamId::of(StreamPurpose::ParticleInit)),
    )?;

    let mut trajectory = Vec::with_capacity(config.steps);
    let mut per_step_seconds = Vec::with_capacity(config.steps);
    let mut search_diagnostics = Vec::new();
    let mut particle_clouds = Vec::new();
    let mut violation_steps = Vec::new();
    let mut degenerate_weight_steps = Vec::new();
    let mut total_cost = 0.0;
    let mut truth_digest = 0u64;
    let mut measurement_digest = 0u64;

    for k in 0..config.steps {
        if config.record_particles {
            particle_clouds.push(particles.iter().cloned().collect());
        }
        let estimate = particles.conditional_mean();

        let started = Instant::now();
        let control = match config.controller {
            ControllerKind::CertaintyEquivalence => policy
                .control(&estimate)
                .map_err(|source| SimError::Policy { step: k, source })?,
            ControllerKind::Cida => {
                let step_stream =
                    root.child(StreamId::step(StreamPurpose::ControlSearch, k as u64));
                let (u, diag) = cida_step(
                    &particles,
                    &policy,
                    model,
                    &config.safe_set,
                    &costs,
                    &config.cida,
                    &step_stream,
                )
                .map_err(|source| SimError::Search { step: k, source })?;
                search_diagnostics.push(diag);
                u
            }
        };
        per_step_seconds.push(started.elapsed().as_secs_f64());

        let violated = !config.safe_set.is_safe(&truth);
        if violated {
            violation_steps.push(k);
        }
        total_cost += costs.running(&truth, &control, k);
        trajectory.push(TrajectoryRow {
            k,
            state: truth.clone(),
            estimate,
            control: control.clone(),
            violated,
        });

        let w = config
            .model
            .process_noise()
            .sample(&root.child(StreamId::step(StreamPurpose::TruthNoise, k as u64)));
        truth_digest = absorb_f64(truth_digest, &w);
        truth = model.step(&truth, &control, &w);

        let v = config
            .model
            .measurement_noise()
            .sample(&root.child(StreamId::step(StreamPurpose::MeasurementNoise, k as u64)));
        measurement_digest = absorb_f64(measurement_digest, &v);
        let y = model.measure(&truth, &v);

        particles = particles.time_update(
            &control,
            model,
            &root.child(StreamId::step(StreamPurpose::FilterPropagate, k as u64)),
        );
        let weights = particles.measurement_weights(&y, model);
        if weights.is_degenerate() {
            degenerate_weight_steps.push(k);
        }
        particles = particles.resample(
            &weights,
            &root.child(StreamId::step(StreamPurpose::FilterResample, k as u64)),
        );
        if !particles.all_finite() || !truth.is_finite() {
            return Err(SimError::FilterDiverged { step: k });
        }
    }

    let mean_step_seconds = per_step_seconds.iter().sum::<f64>() / config.steps as f64;
    Ok(RunMetrics {
        controller: config.controller,
        seed: config.seed,
        steps: config.steps,
        violation_count: violation_steps.len(),
        violation_steps,
        total_cost,
        mean_step_seconds,
        per_step_seconds,
        truth_noise_digest: truth_digest,
        measurement_noise_digest: measurement_digest,
        degenerate_weight_steps,
        trajectory,
        search_diagnostics,
        particle_clouds,
    })
}

/// Per-run summary kept in comparison reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub controller: ControllerKind,
    pub violation_count: usize,
    pub violation_rate: f64,
    pub total_cost: f64,
    pub mean_step_seconds: f64,
    pub degenerate_weight_steps: usize,
}

impl RunSummary {
    fn of(metrics: &RunMetrics) -> Self {
        Self {
            controller: metrics.controller,
            violation_count: metrics.violation_count,
            violation_rate: metrics.violation_rate(),
            total_cost: metrics.total_cost,
            mean_step_seconds: metrics.mean_step_seconds,
            degenerate_weight_steps: metrics.degenerate_weight_steps.len(),
        }
    }
}

/// One seed run under both controllers with identical disturbances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairedRun {
    pub seed: u64,
    pub baseline: RunSummary,
    pub candidate: RunSummary,
    /// Baseline violations over candidate violations; paired zeros give 1.
    pub safety_factor: f64,
    /// Both runs consumed bitwise-identical truth and measurement noise.
    pub noise_streams_identical: bool,
}

/// Aggregate of a multi-seed paired comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline_controller: ControllerKind,
    pub candidate_controller: ControllerKind,
    pub pairs: Vec<PairedRun>,
    pub median_baseline_violations: f64,
    pub median_candidate_violations: f64,
    pub median_baseline_rate: f64,
    pub median_candidate_rate: f64,
    pub median_safety_factor: f64,
}

/// Report plus the full per-run metrics behind it.
pub struct ComparisonOutcome {
    pub report: ComparisonReport,
    /// `(baseline, candidate)` metrics per seed, in seed order.
    pub runs: Vec<(RunMetrics, RunMetrics)>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite medians"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn safety_factor(baseline: usize, candidate: usize) -> f64 {
    if candidate == 0 {
        if baseline == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        baseline as f64 / candidate as f64
    }
}

/// Runs every seed under both controllers with common random numbers and
/// aggregates paired safety factors. Seeds run concurrently; the outcome is
/// independent of scheduling.
pub fn compare_controllers(
    base: &SimulationConfig,
    seeds: &[u64],
    baseline: ControllerKind,
    candidate: ControllerKind,
) -> Result<ComparisonOutcome, SimError> {
    if seeds.is_empty() {
        return Err(SimError::Param(ParamError::Empty { context: "comparison seeds" }));
    }
    let runs: Vec<(RunMetrics, RunMetrics)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.controller = baseline;
            let base_run = run_closed_loop(&cfg)?;
            cfg.controller = candidate;
            let cand_run = run_closed_loop(&cfg)?;
            Ok((base_run, cand_run))
        })
        .collect::<Result<_, SimError>>()?;

    let pairs: Vec<PairedRun> = runs
        .iter()
        .map(|(b, c)| PairedRun {
            seed: b.seed,
            baseline: RunSummary::of(b),
            candidate: RunSummary::of(c),
            safety_factor: safety_factor(b.violation_count, c.violation_count),
            noise_streams_identical: b.truth_noise_digest == c.truth_noise_digest
                && b.measurement_noise_digest == c.measurement_noise_digest,
        })
        .collect();

    let mut base_v: Vec<f64> = pairs.iter().map(|p| p.baseline.violation_count as f64).collect();
    let mut cand_v: Vec<f64> = pairs.iter().map(|p| p.candidate.violation_count as f64).collect();
    let mut base_r: Vec<f64> = pairs.iter().map(|p| p.baseline.violation_rate).collect();
    let mut cand_r: Vec<f64> = pairs.iter().map(|p| p.candidate.violation_rate).collect();
    let mut factors: Vec<f64> = pairs.iter().map(|p| p.safety_factor).collect();
    let report = ComparisonReport {
        baseline_controller: baseline,
        candidate_controller: candidate,
        median_baseline_violations: median(&mut base_v),
        median_candidate_violations: median(&mut cand_v),
        median_baseline_rate: median(&mut base_r),
        median_candidate_rate: median(&mut cand_r),
        median_safety_factor: median(&mut factors),
        pairs,
    };
    Ok(ComparisonOutcome { report, runs })
}

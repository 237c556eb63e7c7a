//! Randomized safe control search.
//!
//! Each step samples candidate control sequences by rolling a safety-aware
//! policy out on noisy trajectories drawn from the particle set, evaluates
//! every candidate on an independent batch of Monte Carlo scenarios, and
//! keeps the cheapest candidate whose empirical per-step safety frequencies
//! clear the chance-constraint margin. A noise-free rollout from the
//! particle mean always joins the candidate pool, so the search can only
//! improve on plain certainty-equivalence control.

use crate::dynamics::StochasticModel;
use crate::particle_filter::ParticleSet;
use crate::rng::{RngStream, StreamId, StreamPurpose};
use crate::safety::{ControlPolicy, PolicyError, StateConstraint};
use crate::types::{ChanceParams, ControlVec, ParamError, StateVec};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// How statistically infeasible candidates participate in selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Infeasible candidates get infinite cost.
    Hard,
    /// Infeasible candidates keep their Monte Carlo cost; feasible ones are
    /// still preferred, but ties among infeasible candidates stay
    /// cost-ordered.
    Soft,
}

/// Stage and terminal cost callbacks. The running cost receives the state,
/// the applied control, and the step index within the horizon.
pub struct StageCostSpec {
    running: Box<dyn Fn(&StateVec, &ControlVec, usize) -> f64 + Send + Sync>,
    terminal: Box<dyn Fn(&StateVec) -> f64 + Send + Sync>,
}

impl StageCostSpec {
    pub fn new(
        running: impl Fn(&StateVec, &ControlVec, usize) -> f64 + Send + Sync + 'static,
        terminal: impl Fn(&StateVec) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { running: Box::new(running), terminal: Box::new(terminal) }
    }

    /// Quadratic penalty on the distance from a circular orbit of `radius`
    /// about the origin, applied at every stage and at the horizon end.
    pub fn orbit_tracking(radius: f64) -> Self {
        let stage = move |x: &StateVec| {
            let d = (x[0] * x[0] + x[1] * x[1]).sqrt();
            (d - radius) * (d - radius)
        };
        Self::new(move |x, _, _| stage(x), move |x| stage(x))
    }

    pub fn running(&self, x: &StateVec, u: &ControlVec, k: usize) -> f64 {
        (self.running)(x, u, k)
    }

    pub fn terminal(&self, x: &StateVec) -> f64 {
        (self.terminal)(x)
    }
}

/// Where a candidate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrigin {
    Sampled,
    CertaintyEquivalence,
}

/// A candidate control sequence with its Monte Carlo evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutCandidate {
    pub controls: Vec<ControlVec>,
    /// Empirical safety frequency of the predicted state at each step
    /// `1..=N` of the horizon.
    pub feasibility_fractions: Vec<f64>,
    /// Scenario-averaged discounted cost; infinite for infeasible
    /// candidates under hard constraints.
    pub cost: f64,
    /// All per-step frequencies reached `1 - alpha`.
    pub feasible: bool,
    pub origin: CandidateOrigin,
}

impl RolloutCandidate {
    pub fn min_feasibility(&self) -> f64 {
        self.feasibility_fractions.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Search configuration: chance-constraint parameters, constraint handling,
/// and the exploration noise multiplier used when sampling candidates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CidaConfig {
    pub chance: ChanceParams,
    pub constraint_mode: ConstraintMode,
    /// Multiplies the process-noise standard deviation along candidate
    /// rollouts; zero makes every sampled candidate deterministic.
    pub search_noise_scale: f64,
}

impl CidaConfig {
    pub fn new(
        chance: ChanceParams,
        constraint_mode: ConstraintMode,
        search_noise_scale: f64,
    ) -> Result<Self, ParamError> {
        if !(search_noise_scale.is_finite() && search_noise_scale >= 0.0) {
            return Err(ParamError::Invalid {
                context: "search config",
                detail: format!("noise scale must be finite and non-negative (got {search_noise_scale})"),
            });
        }
        Ok(Self { chance, constraint_mode, search_noise_scale })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CidaError {
    #[error("all {attempts} rollouts failed, last error: {last}")]
    AllRolloutsFailed { attempts: usize, last: PolicyError },
}

/// Summary of one evaluated candidate kept in the step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateDiagnostics {
    pub origin: CandidateOrigin,
    pub cost: f64,
    pub min_feasibility: f64,
    pub feasible: bool,
}

/// Per-step record of the search outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub candidates: Vec<CandidateDiagnostics>,
    /// Index of the applied candidate in `candidates`.
    pub selected: usize,
    /// Index of the certainty-equivalence candidate, when its rollout
    /// succeeded.
    pub certainty_equivalence: Option<usize>,
    /// Sampled rollouts whose policy failed before completing the horizon.
    pub failed_rollouts: usize,
    /// Whether the scenario count meets the certification bound for the
    /// configured risk levels.
    pub certified: bool,
    pub wall_clock_seconds: f64,
}

impl StepDiagnostics {
    /// The selected candidate is at least as good as the
    /// certainty-equivalence candidate: never less feasible, and never
    /// costlier within the same feasibility class.
    pub fn dominates_certainty_equivalence(&self) -> bool {
        let Some(ce) = self.certainty_equivalence.map(|i| &self.candidates[i]) else {
            return true;
        };
        let sel = &self.candidates[self.selected];
        if ce.feasible {
            sel.feasible && sel.cost <= ce.cost
        } else if sel.feasible {
            true
        } else {
            sel.min_feasibility > ce.min_feasibility
                || (sel.min_feasibility == ce.min_feasibility && sel.cost <= ce.cost)
        }
    }
}

/// Samples one candidate control sequence by rolling `policy` out over
/// `horizon` steps from a random particle, with process noise scaled by
/// `noise_scale` injected between steps.
pub fn sample_control_sequence(
    particles: &ParticleSet,
    policy: &dyn ControlPolicy,
    model: &dyn StochasticModel,
    horizon: usize,
    noise_scale: f64,
    stream: &RngStream,
) -> Result<Vec<ControlVec>, PolicyError> {
    let init = stream.child(StreamId::of(StreamPurpose::RolloutInit));
    let idx = init.rng().random_range(0..particles.len());
    let mut x = particles.get(idx).clone();
    let mut controls = Vec::with_capacity(horizon);
    let mut w = vec![0.0; model.process_noise().dim()];
    for k in 0..horizon {
        let u = policy.control(&x)?;
        model.process_noise().sample_scaled_into(
            &stream.child(StreamId::step(StreamPurpose::RolloutNoise, k as u64)),
            noise_scale,
            &mut w,
        );
        x = model.step(&x, &u, &w);
        controls.push(u);
    }
    Ok(controls)
}

/// The noise-free policy rollout from the particle mean; the sequence a
/// certainty-equivalence controller would commit to over the horizon.
pub fn certainty_equivalence_sequence(
    particles: &ParticleSet,
    policy: &dyn ControlPolicy,
    model: &dyn StochasticModel,
    horizon: usize,
) -> Result<Vec<ControlVec>, PolicyError> {
    let mut x = particles.conditional_mean();
    let zero = vec![0.0; model.process_noise().dim()];
    let mut controls = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let u = policy.control(&x)?;
        x = model.step(&x, &u, &zero);
        controls.push(u);
    }
    Ok(controls)
}

/// Evaluates a fixed control sequence on `chance.scenarios()` Monte Carlo
/// scenarios: initial states drawn from the particle set with replacement,
/// full process noise along each trajectory. Produces the per-step safety
/// frequencies and the scenario-averaged discounted cost.
pub fn evaluate_candidate(
    controls: &[ControlVec],
    particles: &ParticleSet,
    model: &dyn StochasticModel,
    constraint: &dyn StateConstraint,
    costs: &StageCostSpec,
    chance: &ChanceParams,
    mode: ConstraintMode,
    origin: CandidateOrigin,
    stream: &RngStream,
) -> RolloutCandidate {
    let n = controls.len();
    assert!(n > 0, "candidate control sequence is empty");
    let m = chance.scenarios();
    let gamma = chance.gamma();
    let mut safe_counts = vec![0u32; n];
    let mut cost_sum = 0.0;
    let mut w = vec![0.0; model.process_noise().dim()];

    for q in 0..m {
        let init = stream.child(StreamId::at(StreamPurpose::ScenarioInit, 0, q as u64, 0));
        let idx = init.rng().random_range(0..particles.len());
        let mut x = particles.get(idx).clone();
        let mut scenario_cost = 0.0;
        let mut discount = 1.0;
        for (k, u) in controls.iter().enumerate() {
            scenario_cost += discount * costs.running(&x, u, k);
            model.process_noise().sample_scaled_into(
                &stream.child(StreamId::at(StreamPurpose::ScenarioNoise, 0, q as u64, k as u64)),
                1.0,
                &mut w,
            );
            x = model.step(&x, u, &w);
            if constraint.is_safe(&x) {
                safe_counts[k] += 1;
            }
            discount *= gamma;
        }
        scenario_cost += discount * costs.terminal(&x);
        cost_sum += scenario_cost;
    }

    let feasibility_fractions: Vec<f64> =
        safe_counts.iter().map(|c| *c as f64 / m as f64).collect();
    let threshold = 1.0 - chance.alpha();
    let feasible = feasibility_fractions.iter().all(|a| *a >= threshold);
    let cost = if feasible || mode == ConstraintMode::Soft {
        cost_sum / m as f64
    } else {
        f64::INFINITY
    };
    RolloutCandidate {
        controls: controls.to_vec(),
        feasibility_fractions,
        cost,
        feasible,
        origin,
    }
}

fn best_feasible(candidates: &[RolloutCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.feasible && best.is_none_or(|b| c.cost < candidates[b].cost) {
            best = Some(i);
        }
    }
    best
}

/// Selection rule when no candidate clears the chance constraint: maximize
/// the worst per-step safety frequency, break ties by lower cost, then by
/// lower index.
pub fn select_fallback(candidates: &[RolloutCandidate]) -> usize {
    assert!(!candidates.is_empty(), "fallback selection needs at least one candidate");
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let (bm, bc) = (candidates[best].min_feasibility(), candidates[best].cost);
        let (cm, cc) = (c.min_feasibility(), c.cost);
        if cm > bm || (cm == bm && cc < bc) {
            best = i;
        }
    }
    best
}

/// One receding-horizon search step. Returns the first control of the
/// selected candidate and the full selection record.
///
/// All randomness derives from `stream`; candidate generation and
/// evaluation run data-parallel over the candidate index without affecting
/// the result.
pub fn cida_step(
    particles: &ParticleSet,
    policy: &dyn ControlPolicy,
    model: &dyn StochasticModel,
    constraint: &dyn StateConstraint,
    costs: &StageCostSpec,
    config: &CidaConfig,
    stream: &RngStream,
) -> Result<(ControlVec, StepDiagnostics), CidaError> {
    let started = Instant::now();
    let chance = &config.chance;
    let r = chance.rollouts();
    let horizon = chance.horizon();

    let sampled: Vec<Result<RolloutCandidate, PolicyError>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let candidate_stream = stream.child_at(i as u64, 0, 0);
            sample_control_sequence(
                particles,
                policy,
                model,
                horizon,
                config.search_noise_scale,
                &candidate_stream,
            )
            .map(|controls| {
                evaluate_candidate(
                    &controls,
                    particles,
                    model,
                    constraint,
                    costs,
                    chance,
                    config.constraint_mode,
                    CandidateOrigin::Sampled,
                    &candidate_stream,
                )
            })
        })
        .collect();

    let mut candidates = Vec::with_capacity(r + 1);
    let mut failed_rollouts = 0;
    let mut last_error = None;
    for result in sampled {
        match result {
            Ok(c) => candidates.push(c),
            Err(e) => {
                failed_rollouts += 1;
                last_error = Some(e);
            }
        }
    }

    let ce_stream = stream.child_at(r as u64, 0, 0);
    let certainty_equivalence =
        match certainty_equivalence_sequence(particles, policy, model, horizon) {
            Ok(controls) => {
                candidates.push(evaluate_candidate(
                    &controls,
                    particles,
                    model,
                    constraint,
                    costs,
                    chance,
                    config.constraint_mode,
                    CandidateOrigin::CertaintyEquivalence,
                    &ce_stream,
                ));
                Some(candidates.len() - 1)
            }
            Err(e) => {
                last_error = Some(e);
                None
            }
        };

    if candidates.is_empty() {
        return Err(CidaError::AllRolloutsFailed {
            attempts: r + 1,
            last: last_error.expect("empty candidate pool implies at least one failure"),
        });
    }

    let selected = best_feasible(&candidates).unwrap_or_else(|| select_fallback(&candidates));
    let control = candidates[selected].controls[0].clone();

    let diagnostics = StepDiagnostics {
        candidates: candidates
            .iter()
            .map(|c| CandidateDiagnostics {
                origin: c.origin,
                cost: c.cost,
                min_feasibility: c.min_feasibility(),
                feasible: c.feasible,
            })
            .collect(),
        selected,
        certainty_equivalence,
        failed_rollouts,
        certified: chance.certified(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    debug_assert!(diagnostics.dominates_certainty_equivalence());
    Ok((control, diagnostics))
}

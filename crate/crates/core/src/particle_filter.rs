//! Bootstrap particle filter with systematic resampling.
//!
//! Particles are kept equally weighted between measurement updates; weights
//! exist only transiently between the likelihood evaluation and the resample
//! that follows it.

use crate::dynamics::StochasticModel;
use crate::rng::RngStream;
use crate::types::{ControlVec, DiagGaussian, ParamError, StateVec};
use rand::Rng;
use rayon::prelude::*;

/// Equally weighted particle approximation of the filtering density.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    particles: Vec<StateVec>,
}

/// Normalized importance weights plus a flag marking a degenerate update
/// (all likelihoods underflowed, weights fell back to uniform).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    degenerate: bool,
}

impl WeightVector {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when every likelihood underflowed and the filter substituted
    /// uniform weights.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

impl ParticleSet {
    pub fn from_particles(particles: Vec<StateVec>) -> Result<Self, ParamError> {
        if particles.is_empty() {
            return Err(ParamError::Empty { context: "particle set" });
        }
        let dim = particles[0].dim();
        if particles.iter().any(|p| p.dim() != dim) {
            return Err(ParamError::Invalid {
                context: "particle set",
                detail: "particles must share one dimension".into(),
            });
        }
        Ok(Self { particles })
    }

    /// Draws `count` particles from `init`, one child stream per particle.
    pub fn sample_init(count: usize, init: &DiagGaussian, stream: &RngStream) -> Result<Self, ParamError> {
        if count == 0 {
            return Err(ParamError::Empty { context: "particle set" });
        }
        let particles = (0..count)
            .into_par_iter()
            .map(|j| {
                let draw = init.sample(&stream.child_at(j as u64, 0, 0));
                StateVec::new(draw).expect("finite initial particle")
            })
            .collect();
        Ok(Self { particles })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn get(&self, j: usize) -> &StateVec {
        &self.particles[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateVec> {
        self.particles.iter()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }

    pub fn all_finite(&self) -> bool {
        self.particles.iter().all(|p| p.is_finite())
    }

    /// Propagates every particle through the model under `u`, with an
    /// independent process-noise draw per particle.
    pub fn time_update(&self, u: &ControlVec, model: &dyn StochasticModel, stream: &RngStream) -> ParticleSet {
        let noise = model.process_noise();
        let particles = self
            .particles
            .par_iter()
            .enumerate()
            .map(|(j, x)| {
                let w = noise.sample(&stream.child_at(j as u64, 0, 0));
                model.step(x, u, &w)
            })
            .collect();
        ParticleSet { particles }
    }

    /// Gaussian likelihood weights for measurement `y`, normalized with the
    /// max-log-weight shift. If every weight underflows the result is
    /// uniform and flagged degenerate.
    ///
    /// A zero-variance measurement component contributes nothing when the
    /// predicted value matches `y` exactly and forces the weight to zero
    /// otherwise.
    pub fn measurement_weights(&self, y: &[f64], model: &dyn StochasticModel) -> WeightVector {
        assert_eq!(y.len(), model.measurement_dim(), "measurement dimension mismatch");
        let noise = model.measurement_noise();
        let zero_v = vec![0.0; model.measurement_dim()];
        let log_weights: Vec<f64> = self
            .particles
            .par_iter()
            .map(|x| {
                let predicted = model.measure(x, &zero_v);
                let mut ll = 0.0;
                for ((obs, pred), var) in y.iter().zip(&predicted).zip(noise.variances()) {
                    let resid = obs - pred;
                    if *var == 0.0 {
                        if resid != 0.0 {
                            ll = f64::NEG_INFINITY;
                            break;
                        }
                    } else {
                        ll -= 0.5 * ((std::f64::consts::TAU * var).ln() + resid * resid / var);
                    }
                }
                if ll.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    ll
                }
            })
            .collect();

        let max_ll = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = self.particles.len();
        if !max_ll.is_finite() {
            return WeightVector { weights: vec![1.0 / l as f64; l], degenerate: true };
        }
        let mut weights: Vec<f64> = log_weights.iter().map(|ll| (ll - max_ll).exp()).collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        WeightVector { weights, degenerate: false }
    }

    /// Systematic resampling: one uniform offset in `[0, 1/L)` selects the
    /// comb `offset + j/L`, so each particle's copy count differs from
    /// `L * weight` by less than one.
    pub fn resample(&self, weights: &WeightVector, stream: &RngStream) -> ParticleSet {
        let l = self.particles.len();
        assert_eq!(weights.len(), l, "weight count must match particle count");
        debug_assert!(
            (weights.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9,
            "weights must be normalized"
        );
        let offset = stream.rng().random::<f64>() / l as f64;
        let mut particles = Vec::with_capacity(l);
        let mut j = 0;
        let mut cum = weights.weights[0];
        for i in 0..l {
            let point = offset + i as f64 / l as f64;
            while point >= cum && j + 1 < l {
                j += 1;
                cum += weights.weights[j];
            }
            particles.push(self.particles[j].clone());
        }
        ParticleSet { particles }
    }

    /// Equally weighted sample mean.
    pub fn conditional_mean(&self) -> StateVec {
        let dim = self.dim();
        let mut mean = vec![0.0; dim];
        for p in &self.particles {
            for d in 0..dim {
                mean[d] += p[d];
            }
        }
        let l = self.particles.len() as f64;
        for m in &mut mean {
            *m /= l;
        }
        StateVec::new(mean).expect("finite mean of finite particles")
    }
}

//! TOML configuration for the workbench.
//!
//! Every key is optional; the defaults reproduce the built-in benchmark, so
//! an empty file (or no file at all) runs the standard setup and a partial
//! file overrides just the named keys. Unknown keys are rejected rather than
//! silently ignored.

use anyhow::{Context, Result};
use cida_core::{
    ChanceParams, CidaConfig, CircularBarrier, ConstraintMode, ControlBounds, ControllerKind,
    DiagGaussian, OrbitFieldParams, SafeSetSpec, SimulationConfig, UnicycleModel, UnicycleParams,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Control period in seconds.
    pub tau: f64,
    /// Forward speed in m/s.
    pub speed: f64,
    /// Turn-rate bound; controls live in `[-limit, limit]` rad/s.
    pub turn_rate_limit: f64,
    /// Process noise variances for `(x, y, theta)`.
    pub process_noise_var: Vec<f64>,
    /// Measurement noise variances for the position fix `(x, y)`.
    pub measurement_noise_var: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            tau: 0.2,
            speed: 5.0,
            turn_rate_limit: PI,
            process_noise_var: vec![0.2, 0.2, 0.1],
            measurement_noise_var: vec![0.1, 0.1],
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSection {
    pub radius: f64,
    pub gain: f64,
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self { radius: 10.0, gain: 0.3 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeSetSection {
    /// Linear class-kappa gain of the barrier conditions.
    pub gain: f64,
    pub obstacles: Vec<ObstacleEntry>,
}

impl Default for SafeSetSection {
    fn default() -> Self {
        Self {
            gain: 0.05,
            obstacles: vec![
                ObstacleEntry { center: [9.0, -5.0], radius: 3.0 },
                ObstacleEntry { center: [-10.0, -9.0], radius: 4.0 },
                ObstacleEntry { center: [-7.0, 10.0], radius: 3.0 },
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    /// Proportional gain of the heading tracker.
    pub gain: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self { gain: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChanceSection {
    /// Tolerated per-step violation probability.
    pub epsilon: f64,
    /// Stricter empirical threshold the Monte Carlo check enforces.
    pub alpha: f64,
    /// Certification confidence parameter.
    pub delta: f64,
    /// Monte Carlo scenarios per candidate.
    pub scenarios: usize,
    /// Sampled candidate sequences per step.
    pub rollouts: usize,
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Cost discount factor.
    pub gamma: f64,
}

impl Default for ChanceSection {
    fn default() -> Self {
        Self {
            epsilon: 0.15,
            alpha: 0.05,
            delta: 0.05,
            scenarios: 150,
            rollouts: 150,
            horizon: 10,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    /// `soft` keeps Monte Carlo costs for infeasible candidates, `hard`
    /// assigns them infinite cost.
    pub constraint_mode: ConstraintMode,
    /// Multiplier on the process-noise standard deviation along candidate
    /// rollouts.
    pub noise_scale: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self { constraint_mode: ConstraintMode::Soft, noise_scale: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub particles: usize,
    pub steps: usize,
    /// Mean of the initial state distribution `(x, y, theta)`.
    pub init_mean: Vec<f64>,
    /// Variances of the initial state distribution.
    pub init_var: Vec<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            particles: 1000,
            steps: 750,
            init_mean: vec![10.0, 0.0, -FRAC_PI_2],
            init_var: vec![0.2, 0.2, 0.2],
        }
    }
}

/// Grid used by the `field` export; independent of the simulation itself.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Grid points per axis.
    pub grid: usize,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { x_min: -15.0, x_max: 15.0, y_min: -15.0, y_max: 15.0, grid: 31 }
    }
}

/// Root of the TOML schema.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub orbit: OrbitSection,
    pub safe_set: SafeSetSection,
    pub policy: PolicySection,
    pub chance: ChanceSection,
    pub search: SearchSection,
    pub simulation: SimulationSection,
    pub field: FieldSection,
}

impl ConfigFile {
    /// Loads a config file, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))
    }

    pub fn safe_set(&self) -> Result<SafeSetSpec> {
        let barriers = self
            .safe_set
            .obstacles
            .iter()
            .map(|o| CircularBarrier::new(o.center, o.radius))
            .collect::<Result<Vec<_>, _>>()
            .context("invalid obstacle")?;
        SafeSetSpec::new(barriers, self.safe_set.gain).context("invalid [safe_set]")
    }

    pub fn orbit(&self) -> Result<OrbitFieldParams> {
        OrbitFieldParams::new(self.orbit.radius, self.orbit.gain).context("invalid [orbit]")
    }

    pub fn model(&self) -> Result<UnicycleModel> {
        UnicycleModel::new(
            UnicycleParams::new(self.model.tau, self.model.speed).context("invalid [model]")?,
            DiagGaussian::centered(self.model.process_noise_var.clone())
                .context("invalid [model] process_noise_var")?,
            DiagGaussian::centered(self.model.measurement_noise_var.clone())
                .context("invalid [model] measurement_noise_var")?,
            ControlBounds::symmetric_scalar(self.model.turn_rate_limit)
                .context("invalid [model] turn_rate_limit")?,
        )
        .context("invalid [model]")
    }

    /// Assembles the full closed-loop configuration for one run.
    pub fn build(&self, seed: u64, controller: ControllerKind) -> Result<SimulationConfig> {
        let chance = ChanceParams::new(
            self.chance.epsilon,
            self.chance.alpha,
            self.chance.delta,
            self.chance.scenarios,
            self.chance.rollouts,
            self.chance.horizon,
            self.chance.gamma,
        )
        .context("invalid [chance]")?;
        let cida = CidaConfig::new(chance, self.search.constraint_mode, self.search.noise_scale)
            .context("invalid [search]")?;
        let init =
            DiagGaussian::new(self.simulation.init_mean.clone(), self.simulation.init_var.clone())
                .context("invalid [simulation] initial distribution")?;
        let config = SimulationConfig {
            model: self.model()?,
            safe_set: self.safe_set()?,
            field: self.orbit()?,
            policy_gain: self.policy.gain,
            init,
            particles: self.simulation.particles,
            steps: self.simulation.steps,
            controller,
            cida,
            seed,
            threads: None,
            record_particles: false,
        };
        config.validate().context("invalid configuration")?;
        Ok(config)
    }
}

//! Stochastic discrete-time models and the planar unicycle used throughout
//! the benchmark.

use crate::types::{ControlBounds, ControlVec, DiagGaussian, ParamError, StateVec};
use serde::{Deserialize, Serialize};

/// Discrete-time stochastic model with additive process and measurement
/// noise described by diagonal Gaussians.
pub trait StochasticModel: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;

    /// One transition `x' = f(x, u) + w`. `w` must have `state_dim` entries;
    /// pass zeros for the noise-free flow.
    fn step(&self, x: &StateVec, u: &ControlVec, w: &[f64]) -> StateVec;

    /// One observation `y = g(x) + v`. `v` must have `measurement_dim`
    /// entries.
    fn measure(&self, x: &StateVec, v: &[f64]) -> Vec<f64>;

    fn process_noise(&self) -> &DiagGaussian;
    fn measurement_noise(&self) -> &DiagGaussian;
    fn control_bounds(&self) -> &ControlBounds;
}

/// Numerically stable `sin(t) / t`, continuous through `t = 0`.
pub fn sinc_stable(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sin() / t
    }
}

/// Geometry of the constant-speed unicycle: sampling period and forward
/// speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnicycleParams {
    pub tau: f64,
    pub speed: f64,
}

impl UnicycleParams {
    pub fn new(tau: f64, speed: f64) -> Result<Self, ParamError> {
        if !(tau.is_finite() && tau > 0.0 && speed.is_finite() && speed > 0.0) {
            return Err(ParamError::Invalid {
                context: "unicycle",
                detail: format!("tau and speed must be positive (got tau={tau}, speed={speed})"),
            });
        }
        Ok(Self { tau, speed })
    }
}

/// Exact zero-order-hold discretization of the unicycle with turn rate held
/// constant over the period, plus additive noise:
///
/// ```text
/// x'     = x + tau V sinc(w tau / 2) cos(theta + w tau / 2) + n_x
/// y'     = y + tau V sinc(w tau / 2) sin(theta + w tau / 2) + n_y
/// theta' = theta + tau w + n_theta
/// ```
///
/// The heading is left unwrapped; consumers that need an angle in
/// `(-pi, pi]` wrap at the point of use.
pub fn unicycle_step(params: &UnicycleParams, x: &StateVec, omega: f64, noise: &[f64]) -> StateVec {
    debug_assert!(x.dim() == 3, "unicycle state is (x, y, theta)");
    debug_assert!(noise.len() == 3, "unicycle noise is 3-dimensional");
    let half = omega * params.tau / 2.0;
    let chord = params.tau * params.speed * sinc_stable(half);
    let mid = x.heading() + half;
    let (sin_mid, cos_mid) = mid.sin_cos();
    StateVec::new(vec![
        x[0] + chord * cos_mid + noise[0],
        x[1] + chord * sin_mid + noise[1],
        x[2] + params.tau * omega + noise[2],
    ])
    .expect("finite unicycle step")
}

/// Position observation `y = (x, y) + v`.
pub fn unicycle_measure(x: &StateVec, noise: &[f64]) -> Vec<f64> {
    debug_assert!(noise.len() == 2, "position measurement noise is 2-dimensional");
    vec![x[0] + noise[0], x[1] + noise[1]]
}

/// Unicycle packaged with its noise models and turn-rate bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnicycleModel {
    params: UnicycleParams,
    process_noise: DiagGaussian,
    measurement_noise: DiagGaussian,
    bounds: ControlBounds,
}

impl UnicycleModel {
    pub fn new(
        params: UnicycleParams,
        process_noise: DiagGaussian,
        measurement_noise: DiagGaussian,
        bounds: ControlBounds,
    ) -> Result<Self, ParamError> {
        if process_noise.dim() != 3 {
            return Err(ParamError::LengthMismatch {
                context: "unicycle process noise",
                a: process_noise.dim(),
                b: 3,
            });
        }
        if measurement_noise.dim() != 2 {
            return Err(ParamError::LengthMismatch {
                context: "unicycle measurement noise",
                a: measurement_noise.dim(),
                b: 2,
            });
        }
        if bounds.dim() != 1 {
            return Err(ParamError::LengthMismatch {
                context: "unicycle control bounds",
                a: bounds.dim(),
                b: 1,
            });
        }
        Ok(Self { params, process_noise, measurement_noise, bounds })
    }

    pub fn params(&self) -> &UnicycleParams {
        &self.params
    }
}

impl StochasticModel for UnicycleModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn measurement_dim(&self) -> usize {
        2
    }

    fn step(&self, x: &StateVec, u: &ControlVec, w: &[f64]) -> StateVec {
        unicycle_step(&self.params, x, u[0], w)
    }

    fn measure(&self, x: &StateVec, v: &[f64]) -> Vec<f64> {
        unicycle_measure(x, v)
    }

    fn process_noise(&self) -> &DiagGaussian {
        &self.process_noise
    }

    fn measurement_noise(&self) -> &DiagGaussian {
        &self.measurement_noise
    }

    fn control_bounds(&self) -> &ControlBounds {
        &self.bounds
    }
}

//! Shared value types: states, controls, diagonal Gaussians, chance-constraint
//! parameters, and the sample-complexity bound that certifies them.

use crate::rng::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{context}: vector must be non-empty")]
    Empty { context: &'static str },
    #[error("{context}: entries must be finite")]
    NonFinite { context: &'static str },
    #[error("{context}: lengths {a} and {b} disagree")]
    LengthMismatch { context: &'static str, a: usize, b: usize },
    #[error("{context}: {detail}")]
    Invalid { context: &'static str, detail: String },
}

fn check_finite(v: &[f64], context: &'static str) -> Result<(), ParamError> {
    if v.is_empty() {
        return Err(ParamError::Empty { context });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ParamError::NonFinite { context });
    }
    Ok(())
}

/// State vector, layout `(x, y, heading, ...)` for planar models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVec(Vec<f64>);

impl StateVec {
    pub fn new(values: Vec<f64>) -> Result<Self, ParamError> {
        check_finite(&values, "state")?;
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Planar position `(x, y)`. Panics if the state has fewer than two
    /// components.
    pub fn position(&self) -> [f64; 2] {
        [self.0[0], self.0[1]]
    }

    /// Heading component of a planar pose. Panics below three components.
    pub fn heading(&self) -> f64 {
        self.0[2]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Deref for StateVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Control input vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlVec(Vec<f64>);

impl ControlVec {
    pub fn new(values: Vec<f64>) -> Result<Self, ParamError> {
        check_finite(&values, "control")?;
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Result<Self, ParamError> {
        Self::new(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for ControlVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Axis-aligned control box `[lower, upper]` per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ControlBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ParamError> {
        check_finite(&lower, "control bounds")?;
        check_finite(&upper, "control bounds")?;
        if lower.len() != upper.len() {
            return Err(ParamError::LengthMismatch {
                context: "control bounds",
                a: lower.len(),
                b: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(ParamError::Invalid {
                context: "control bounds",
                detail: "lower bound exceeds upper bound".into(),
            });
        }
        Ok(Self { lower, upper })
    }

    /// Scalar interval bound.
    pub fn symmetric_scalar(limit: f64) -> Result<Self, ParamError> {
        Self::new(vec![-limit], vec![limit])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, u: &ControlVec) -> bool {
        u.len() == self.lower.len()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Componentwise clamp into the box.
    pub fn saturate(&self, u: &ControlVec) -> ControlVec {
        let clamped = u
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect();
        ControlVec(clamped)
    }
}

/// Clamp a scalar to `[lo, hi]`.
pub fn saturate(value: f64, lo: f64, hi: f64) -> f64 {
    value.clamp(lo, hi)
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut r = angle % std::f64::consts::TAU;
    if r <= -std::f64::consts::PI {
        r += std::f64::consts::TAU;
    } else if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Gaussian with diagonal covariance, the only distribution family the
/// filters and rollouts need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    variances: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self, ParamError> {
        check_finite(&mean, "gaussian mean")?;
        check_finite(&variances, "gaussian variances")?;
        if mean.len() != variances.len() {
            return Err(ParamError::LengthMismatch {
                context: "gaussian",
                a: mean.len(),
                b: variances.len(),
            });
        }
        if variances.iter().any(|v| *v < 0.0) {
            return Err(ParamError::Invalid {
                context: "gaussian",
                detail: "variances must be non-negative".into(),
            });
        }
        Ok(Self { mean, variances })
    }

    /// Zero-mean Gaussian.
    pub fn centered(variances: Vec<f64>) -> Result<Self, ParamError> {
        let mean = vec![0.0; variances.len()];
        Self::new(mean, variances)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// One draw from the start of `stream`.
    pub fn sample(&self, stream: &RngStream) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_scaled_into(stream, 1.0, &mut out);
        out
    }

    /// Draw with every standard deviation multiplied by `scale`; `scale = 0`
    /// returns the mean exactly.
    pub fn sample_scaled(&self, stream: &RngStream, scale: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_scaled_into(stream, scale, &mut out);
        out
    }

    /// Allocation-free variant for hot loops.
    pub fn sample_scaled_into(&self, stream: &RngStream, scale: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim(), "output buffer dimension mismatch");
        let mut rng = stream.rng();
        for ((o, m), v) in out.iter_mut().zip(&self.mean).zip(&self.variances) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + scale * v.sqrt() * z;
        }
    }
}

/// Parameters of the chance-constrained search: risk levels, sample counts,
/// horizon, and discount.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChanceParams {
    epsilon: f64,
    alpha: f64,
    delta: f64,
    scenarios: usize,
    rollouts: usize,
    horizon: usize,
    gamma: f64,
}

impl ChanceParams {
    pub fn new(
        epsilon: f64,
        alpha: f64,
        delta: f64,
        scenarios: usize,
        rollouts: usize,
        horizon: usize,
        gamma: f64,
    ) -> Result<Self, ParamError> {
        let ok = (0.0..1.0).contains(&epsilon)
            && (0.0..1.0).contains(&alpha)
            && alpha < epsilon
            && delta > 0.0
            && delta < 1.0
            && gamma > 0.0
            && gamma <= 1.0;
        if !ok {
            return Err(ParamError::Invalid {
                context: "chance parameters",
                detail: format!(
                    "require 0 <= alpha < epsilon < 1, 0 < delta < 1, 0 < gamma <= 1 \
                     (got epsilon={epsilon}, alpha={alpha}, delta={delta}, gamma={gamma})"
                ),
            });
        }
        if scenarios == 0 || rollouts == 0 || horizon == 0 {
            return Err(ParamError::Invalid {
                context: "chance parameters",
                detail: "scenarios, rollouts, and horizon must be positive".into(),
            });
        }
        Ok(Self { epsilon, alpha, delta, scenarios, rollouts, horizon, gamma })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Monte Carlo evaluations per candidate.
    pub fn scenarios(&self) -> usize {
        self.scenarios
    }

    /// Sampled candidate sequences per step.
    pub fn rollouts(&self) -> usize {
        self.rollouts
    }

    /// Prediction horizon length.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Whether `scenarios` meets the certification bound for these levels.
    pub fn certified(&self) -> bool {
        match hoeffding_min_samples(self.epsilon, self.alpha, self.delta) {
            Ok(m) => self.scenarios as u64 >= m,
            Err(_) => false,
        }
    }
}

/// Smallest Monte Carlo sample count `M` such that empirical per-step safety
/// frequencies of at least `1 - alpha` certify true per-step safety of at
/// least `1 - epsilon` with confidence `1 - delta`:
///
/// ```text
/// M = ceil( ln(1/delta) / (2 (epsilon - alpha)^2) )
/// ```
///
/// floored at 1.
pub fn hoeffding_min_samples(epsilon: f64, alpha: f64, delta: f64) -> Result<u64, ParamError> {
    let ok = (0.0..1.0).contains(&epsilon)
        && (0.0..1.0).contains(&alpha)
        && alpha < epsilon
        && delta > 0.0
        && delta < 1.0;
    if !ok {
        return Err(ParamError::Invalid {
            context: "sample bound",
            detail: format!(
                "require 0 <= alpha < epsilon < 1 and 0 < delta < 1 \
                 (got epsilon={epsilon}, alpha={alpha}, delta={delta})"
            ),
        });
    }
    let raw = (1.0 / delta).ln() / (2.0 * (epsilon - alpha).powi(2));
    Ok((raw.ceil() as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamId, StreamPurpose};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn test_stream(k: u64) -> RngStream {
        RngStream::new(123, StreamId::step(StreamPurpose::Test, k))
    }

    #[test]
    fn sample_bound_matches_hand_computed_values() {
        assert_eq!(hoeffding_min_samples(0.15, 0.05, 0.05).unwrap(), 150);
        assert_eq!(hoeffding_min_samples(0.10, 0.0, 0.01).unwrap(), 231);
    }

    #[test]
    fn sample_bound_rejects_bad_levels() {
        assert!(hoeffding_min_samples(0.05, 0.05, 0.05).is_err());
        assert!(hoeffding_min_samples(0.05, 0.1, 0.05).is_err());
        assert!(hoeffding_min_samples(1.0, 0.0, 0.05).is_err());
        assert!(hoeffding_min_samples(0.15, -0.01, 0.05).is_err());
        assert!(hoeffding_min_samples(0.15, 0.05, 0.0).is_err());
        assert!(hoeffding_min_samples(0.15, 0.05, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sample_bound_monotonicity(
            eps in 0.02f64..0.5,
            gap_frac in 0.1f64..0.9,
            delta in 0.001f64..0.5,
        ) {
            let alpha = eps * (1.0 - gap_frac);
            let m = hoeffding_min_samples(eps, alpha, delta).unwrap();
            // shrinking delta can only demand more samples
            let m_tight = hoeffding_min_samples(eps, alpha, delta * 0.5).unwrap();
            prop_assert!(m_tight >= m);
            // widening the epsilon-alpha gap can only demand fewer
            let m_wide = hoeffding_min_samples(eps, alpha * 0.5, delta).unwrap();
            prop_assert!(m_wide <= m);
            prop_assert!(m >= 1);
        }
    }

    #[test]
    fn zero_variance_gaussian_returns_the_mean() {
        let g = DiagGaussian::new(vec![1.5, -2.0], vec![0.0, 0.0]).unwrap();
        for k in 0..10 {
            assert_eq!(g.sample(&test_stream(k)), vec![1.5, -2.0]);
        }
    }

    #[test]
    fn scale_zero_returns_the_mean() {
        let g = DiagGaussian::new(vec![0.3], vec![4.0]).unwrap();
        assert_eq!(g.sample_scaled(&test_stream(0), 0.0), vec![0.3]);
    }

    #[test]
    fn gaussian_sample_moments_match_parameters() {
        let g = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap();
        let n = 100_000u64;
        let draws: Vec<f64> = (0..n).map(|k| g.sample(&test_stream(k))[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "sample mean {mean} off");
        assert!((var - 1.0).abs() < 0.05, "sample variance {var} off");
    }

    #[test]
    fn gaussian_draws_are_reproducible_per_stream() {
        let g = DiagGaussian::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(g.sample(&test_stream(7)), g.sample(&test_stream(7)));
        assert_ne!(g.sample(&test_stream(7)), g.sample(&test_stream(8)));
    }

    #[test]
    fn gaussian_rejects_negative_variance_and_mismatch() {
        assert!(DiagGaussian::new(vec![0.0], vec![-1.0]).is_err());
        assert!(DiagGaussian::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(DiagGaussian::new(vec![], vec![]).is_err());
        assert!(DiagGaussian::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn wrap_angle_lands_in_half_open_interval() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(5.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        for i in -20..20 {
            let a = i as f64 * 0.7;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "wrap({a}) = {w} out of range");
            assert!(((a - w) / std::f64::consts::TAU).round() * std::f64::consts::TAU - (a - w) < 1e-9);
        }
    }

    #[test]
    fn saturate_clamps_both_ends() {
        assert_eq!(saturate(5.0, -PI, PI), PI);
        assert_eq!(saturate(-5.0, -PI, PI), -PI);
        assert_eq!(saturate(0.3, -PI, PI), 0.3);
    }

    #[test]
    fn control_bounds_contain_and_saturate() {
        let b = ControlBounds::symmetric_scalar(PI).unwrap();
        let inside = ControlVec::scalar(1.0).unwrap();
        let outside = ControlVec::scalar(4.0).unwrap();
        assert!(b.contains(&inside));
        assert!(!b.contains(&outside));
        assert_eq!(b.saturate(&outside).as_slice(), &[PI]);
        assert!(b.contains(&b.saturate(&outside)));
    }

    #[test]
    fn control_bounds_reject_crossed_limits() {
        assert!(ControlBounds::new(vec![1.0], vec![-1.0]).is_err());
        assert!(ControlBounds::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn vectors_reject_non_finite_entries() {
        assert!(StateVec::new(vec![0.0, f64::INFINITY]).is_err());
        assert!(ControlVec::new(vec![f64::NAN]).is_err());
        assert!(StateVec::new(vec![]).is_err());
    }

    #[test]
    fn chance_params_validate_levels() {
        assert!(ChanceParams::new(0.15, 0.05, 0.05, 150, 150, 10, 1.0).is_ok());
        assert!(ChanceParams::new(0.05, 0.15, 0.05, 150, 150, 10, 1.0).is_err());
        assert!(ChanceParams::new(0.15, 0.05, 0.05, 0, 150, 10, 1.0).is_err());
        assert!(ChanceParams::new(0.15, 0.05, 0.05, 150, 150, 10, 1.5).is_err());
    }

    #[test]
    fn certification_reflects_the_sample_bound() {
        let certified = ChanceParams::new(0.15, 0.05, 0.05, 150, 10, 5, 1.0).unwrap();
        let short = ChanceParams::new(0.15, 0.05, 0.05, 149, 10, 5, 1.0).unwrap();
        assert!(certified.certified());
        assert!(!short.certified());
    }
}

//! Barrier-based safety: circular obstacle barriers, an orbit-tracking
//! guidance field, and the quadratic safety filter that minimally modifies a
//! desired velocity so the barrier conditions hold.

use crate::types::{saturate, wrap_angle, ControlBounds, ControlVec, ParamError, StateVec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Circular obstacle with barrier `h(p) = |p - center|^2 - radius^2`;
/// `h >= 0` is the safe side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularBarrier {
    pub center: [f64; 2],
    pub radius: f64,
}

impl CircularBarrier {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self, ParamError> {
        if !(center.iter().all(|c| c.is_finite()) && radius.is_finite() && radius > 0.0) {
            return Err(ParamError::Invalid {
                context: "barrier",
                detail: format!("finite center and positive radius required (radius={radius})"),
            });
        }
        Ok(Self { center, radius })
    }

    pub fn barrier_value(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy - self.radius * self.radius
    }

    /// Gradient of the barrier with respect to position, `2 (p - center)`.
    pub fn barrier_gradient(&self, p: [f64; 2]) -> [f64; 2] {
        [2.0 * (p[0] - self.center[0]), 2.0 * (p[1] - self.center[1])]
    }
}

/// Intersection of circular-barrier safe sides with a shared linear
/// class-kappa gain used by the safety filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafeSetSpec {
    barriers: Vec<CircularBarrier>,
    gain: f64,
}

impl SafeSetSpec {
    pub fn new(barriers: Vec<CircularBarrier>, gain: f64) -> Result<Self, ParamError> {
        if barriers.is_empty() {
            return Err(ParamError::Empty { context: "safe set" });
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(ParamError::Invalid {
                context: "safe set",
                detail: format!("class-kappa gain must be positive (got {gain})"),
            });
        }
        Ok(Self { barriers, gain })
    }

    pub fn barriers(&self) -> &[CircularBarrier] {
        &self.barriers
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Smallest barrier value at `p`; non-negative exactly on the safe set.
    pub fn min_barrier_value(&self, p: [f64; 2]) -> f64 {
        self.barriers
            .iter()
            .map(|b| b.barrier_value(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn position_is_safe(&self, p: [f64; 2]) -> bool {
        self.min_barrier_value(p) >= 0.0
    }
}

/// Predicate marking the states a trajectory is allowed to visit.
pub trait StateConstraint: Sync {
    fn is_safe(&self, x: &StateVec) -> bool;
}

impl StateConstraint for SafeSetSpec {
    /// Reads the planar position from the first two state components;
    /// boundary states count as safe.
    fn is_safe(&self, x: &StateVec) -> bool {
        self.position_is_safe(x.position())
    }
}

/// Guidance field that converges to a counterclockwise circular orbit of
/// `radius` about the origin; `gain` sets how aggressively the field turns
/// toward the orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitFieldParams {
    pub radius: f64,
    pub gain: f64,
}

impl OrbitFieldParams {
    pub fn new(radius: f64, gain: f64) -> Result<Self, ParamError> {
        if !(radius.is_finite() && radius > 0.0 && gain.is_finite() && gain > 0.0) {
            return Err(ParamError::Invalid {
                context: "orbit field",
                detail: format!("radius and gain must be positive (got {radius}, {gain})"),
            });
        }
        Ok(Self { radius, gain })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("guidance field is undefined at the origin")]
    OriginUndefined,
    #[error("safety filter produced a zero velocity, heading undefined")]
    ZeroControl,
    #[error("safety filter failed: {0}")]
    Qp(#[from] QpError),
}

/// Desired heading of the orbit field at `p`:
/// bearing minus a quarter turn, corrected toward the orbit by
/// `atan(gain * (distance - radius))`, wrapped to `(-pi, pi]`.
pub fn vector_field_heading(field: &OrbitFieldParams, p: [f64; 2]) -> Result<f64, PolicyError> {
    let d = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if d == 0.0 {
        return Err(PolicyError::OriginUndefined);
    }
    let bearing = p[1].atan2(p[0]);
    let correction = (field.gain * (d - field.radius)).atan();
    Ok(wrap_angle(bearing - std::f64::consts::FRAC_PI_2 - correction))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("barrier constraints are mutually infeasible")]
    Infeasible,
    #[error("barrier gradient vanishes inside an obstacle, no safe direction exists")]
    DegenerateGradient,
}

/// One linear inequality `gradient . u >= bound` on the planar velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintRow {
    pub gradient: [f64; 2],
    pub bound: f64,
}

const SLACK_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn slack_ok(u: [f64; 2], rows: &[ConstraintRow]) -> bool {
    rows.iter().all(|r| dot(r.gradient, u) - r.bound >= -SLACK_TOL)
}

/// Minimum-norm modification of `u0` subject to halfspace constraints
/// `gradient . u >= bound`, solved exactly by enumerating active sets of
/// size zero, one, and two. Returns the optimum and the active set chosen.
pub fn project_to_halfspaces(
    u0: [f64; 2],
    rows: &[ConstraintRow],
) -> Result<([f64; 2], Vec<usize>), QpError> {
    if slack_ok(u0, rows) {
        return Ok((u0, vec![]));
    }

    let mut best: Option<(f64, [f64; 2], Vec<usize>)> = None;
    let mut consider = |obj: f64, u: [f64; 2], active: Vec<usize>| {
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, u, active));
        }
    };

    for (i, row) in rows.iter().enumerate() {
        let gg = dot(row.gradient, row.gradient);
        if gg == 0.0 {
            continue;
        }
        let lambda = (row.bound - dot(row.gradient, u0)) / gg;
        if 2.0 * lambda < -DUAL_TOL {
            continue;
        }
        let u = [u0[0] + lambda * row.gradient[0], u0[1] + lambda * row.gradient[1]];
        if slack_ok(u, rows) {
            let d = [u[0] - u0[0], u[1] - u0[1]];
            consider(dot(d, d), u, vec![i]);
        }
    }

    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let (gi, gj) = (rows[i].gradient, rows[j].gradient);
            let det = gi[0] * gj[1] - gi[1] * gj[0];
            let scale = dot(gi, gi).max(dot(gj, gj));
            if det.abs() <= 1e-12 * scale.max(1.0) {
                continue;
            }
            // intersection of the two active hyperplanes
            let u = [
                (rows[i].bound * gj[1] - rows[j].bound * gi[1]) / det,
                (gi[0] * rows[j].bound - gj[0] * rows[i].bound) / det,
            ];
            // stationarity: 2 (u - u0) = mu_i g_i + mu_j g_j
            let rhs = [2.0 * (u[0] - u0[0]), 2.0 * (u[1] - u0[1])];
            let mu_i = (rhs[0] * gj[1] - rhs[1] * gj[0]) / det;
            let mu_j = (gi[0] * rhs[1] - gi[1] * rhs[0]) / det;
            if mu_i < -DUAL_TOL || mu_j < -DUAL_TOL {
                continue;
            }
            if slack_ok(u, rows) {
                let d = [u[0] - u0[0], u[1] - u0[1]];
                consider(dot(d, d), u, vec![i, j]);
            }
        }
    }

    match best {
        Some((_, u, active)) => Ok((u, active)),
        None => Err(QpError::Infeasible),
    }
}

/// Barrier-based safety filter on the planar velocity: solves
///
/// ```text
/// min |u - u0|^2  s.t.  grad h_m(p) . u >= -gain * h_m(p)  for all m
/// ```
///
/// The gradient of a circular barrier vanishes only at its own center,
/// where the barrier is necessarily violated and no velocity direction can
/// recover, so a vanished gradient is an error.
pub fn qp_safety_filter(u0: [f64; 2], p: [f64; 2], safe_set: &SafeSetSpec) -> Result<[f64; 2], QpError> {
    let mut rows = Vec::with_capacity(safe_set.barriers().len());
    for b in safe_set.barriers() {
        let g = b.barrier_gradient(p);
        if dot(g, g) == 0.0 {
            return Err(QpError::DegenerateGradient);
        }
        rows.push(ConstraintRow { gradient: g, bound: -safe_set.gain() * b.barrier_value(p) });
    }
    let (u, _) = project_to_halfspaces(u0, &rows)?;
    Ok(u)
}

/// Heading of the filtered guidance velocity at position `p`: the orbit
/// field's desired velocity (at the field's nominal speed) passed through
/// the safety filter, reduced to its direction.
pub fn safe_heading(
    p: [f64; 2],
    safe_set: &SafeSetSpec,
    field: &OrbitFieldParams,
    speed: f64,
) -> Result<f64, PolicyError> {
    let theta_d = vector_field_heading(field, p)?;
    let u0 = [speed * theta_d.cos(), speed * theta_d.sin()];
    let u = qp_safety_filter(u0, p, safe_set)?;
    if dot(u, u) < 1e-24 {
        return Err(PolicyError::ZeroControl);
    }
    Ok(u[1].atan2(u[0]))
}

/// State-feedback policy interface used by the rollout machinery.
pub trait ControlPolicy: Sync {
    fn control(&self, x: &StateVec) -> Result<ControlVec, PolicyError>;
}

/// Proportional heading tracker: steer toward the safe heading with the turn
/// rate saturated to the control bounds.
#[derive(Clone, Debug)]
pub struct HeadingTrackingPolicy {
    safe_set: SafeSetSpec,
    field: OrbitFieldParams,
    speed: f64,
    gain: f64,
    bounds: ControlBounds,
}

impl HeadingTrackingPolicy {
    pub fn new(
        safe_set: SafeSetSpec,
        field: OrbitFieldParams,
        speed: f64,
        gain: f64,
        bounds: ControlBounds,
    ) -> Result<Self, ParamError> {
        if bounds.dim() != 1 {
            return Err(ParamError::LengthMismatch {
                context: "heading policy bounds",
                a: bounds.dim(),
                b: 1,
            });
        }
        if !(gain.is_finite() && gain > 0.0 && speed.is_finite() && speed > 0.0) {
            return Err(ParamError::Invalid {
                context: "heading policy",
                detail: format!("speed and gain must be positive (got {speed}, {gain})"),
            });
        }
        Ok(Self { safe_set, field, speed, gain, bounds })
    }

    pub fn safe_set(&self) -> &SafeSetSpec {
        &self.safe_set
    }
}

impl ControlPolicy for HeadingTrackingPolicy {
    fn control(&self, x: &StateVec) -> Result<ControlVec, PolicyError> {
        let theta_star = safe_heading(x.position(), &self.safe_set, &self.field, self.speed)?;
        let err = wrap_angle(theta_star - x.heading());
        let omega = saturate(self.gain * err, self.bounds.lower()[0], self.bounds.upper()[0]);
        Ok(ControlVec::scalar(omega).expect("finite saturated control"))
    }
}

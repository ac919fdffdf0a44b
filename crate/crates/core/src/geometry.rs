//! Differentiable safety fields and the translational double-integrator model.
//!
//! Every field follows the same sign convention: `h(q) >= 0` is safe and the
//! obstacle surface is the zero level set.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type SymMat3 = Matrix3<f64>;

/// Distance below which a sphere-margin field has no defined gradient.
const DEGENERATE_RADIUS: f64 = 1e-12;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("gradient undefined at the field center")]
    DegeneratePoint,
    #[error("invalid safety field: {0}")]
    InvalidField(String),
}

/// One obstacle's barrier function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SafetyField {
    /// Half-space `(q - center) . normal >= 0`.
    Plane { center: Vec3, normal: Vec3 },
    /// `sum_k ((q_k - c_k) / a_k)^n - 1` with even `n`.
    Superellipsoid {
        center: Vec3,
        scale: Vec3,
        exponent: u32,
    },
    /// `|q - c| - d_min`.
    SphereMargin { center: Vec3, d_min: f64 },
}

impl SafetyField {
    /// Builds a plane, normalizing `normal`.
    pub fn plane(center: Vec3, normal: Vec3) -> Result<Self, GeometryError> {
        let len = normal.norm();
        if !(len.is_finite() && len > 0.0) {
            return Err(GeometryError::InvalidField("plane normal must be nonzero".into()));
        }
        let field = SafetyField::Plane {
            center,
            normal: normal / len,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn superellipsoid(center: Vec3, scale: Vec3, exponent: u32) -> Result<Self, GeometryError> {
        let field = SafetyField::Superellipsoid {
            center,
            scale,
            exponent,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn sphere_margin(center: Vec3, d_min: f64) -> Result<Self, GeometryError> {
        let field = SafetyField::SphereMargin { center, d_min };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let invalid = |msg: &str| Err(GeometryError::InvalidField(msg.to_owned()));
        match *self {
            SafetyField::Plane { center, normal } => {
                if !all_finite(&center) || !all_finite(&normal) {
                    return invalid("plane fields must be finite");
                }
                if (normal.norm() - 1.0).abs() > UNIT_TOLERANCE {
                    return invalid("plane normal must have unit length");
                }
            }
            SafetyField::Superellipsoid {
                center,
                scale,
                exponent,
            } => {
                if !all_finite(&center) || !all_finite(&scale) {
                    return invalid("superellipsoid fields must be finite");
                }
                if scale.iter().any(|&a| a <= 0.0) {
                    return invalid("superellipsoid scale must be positive");
                }
                if exponent < 2 || exponent % 2 != 0 {
                    return invalid("superellipsoid exponent must be an even integer >= 2");
                }
            }
            SafetyField::SphereMargin { center, d_min } => {
                if !all_finite(&center) || !d_min.is_finite() {
                    return invalid("sphere margin fields must be finite");
                }
                if d_min <= 0.0 {
                    return invalid("d_min must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        match *self {
            SafetyField::Plane { center, .. }
            | SafetyField::Superellipsoid { center, .. }
            | SafetyField::SphereMargin { center, .. } => center,
        }
    }

    pub fn eval_h(&self, q: &Vec3) -> f64 {
        match *self {
            SafetyField::Plane { center, normal } => (q - center).dot(&normal),
            SafetyField::Superellipsoid {
                center,
                scale,
                exponent,
            } => {
                let n = exponent as i32;
                (0..3)
                    .map(|k| ((q[k] - center[k]) / scale[k]).powi(n))
                    .sum::<f64>()
                    - 1.0
            }
            SafetyField::SphereMargin { center, d_min } => (q - center).norm() - d_min,
        }
    }

    pub fn grad_h(&self, q: &Vec3) -> Result<Vec3, GeometryError> {
        match *self {
            SafetyField::Plane { normal, .. } => Ok(normal),
            SafetyField::Superellipsoid {
                center,
                scale,
                exponent,
            } => {
                let n = exponent as i32;
                Ok(Vec3::from_fn(|k, _| {
                    let t = (q[k] - center[k]) / scale[k];
                    f64::from(exponent) / scale[k] * t.powi(n - 1)
                }))
            }
            SafetyField::SphereMargin { center, .. } => {
                let r = q - center;
                let dist = r.norm();
                if dist < DEGENERATE_RADIUS {
                    return Err(GeometryError::DegeneratePoint);
                }
                Ok(r / dist)
            }
        }
    }

    pub fn hess_h(&self, q: &Vec3) -> Result<SymMat3, GeometryError> {
        match *self {
            SafetyField::Plane { .. } => Ok(SymMat3::zeros()),
            SafetyField::Superellipsoid {
                center,
                scale,
                exponent,
            } => {
                let n = exponent as i32;
                let nf = f64::from(exponent);
                let diag = Vec3::from_fn(|k, _| {
                    let t = (q[k] - center[k]) / scale[k];
                    nf * (nf - 1.0) / (scale[k] * scale[k]) * t.powi(n - 2)
                });
                Ok(SymMat3::from_diagonal(&diag))
            }
            SafetyField::SphereMargin { center, .. } => {
                let r = q - center;
                let dist = r.norm();
                if dist < DEGENERATE_RADIUS {
                    return Err(GeometryError::DegeneratePoint);
                }
                let rhat = r / dist;
                Ok((SymMat3::identity() - rhat * rhat.transpose()) / dist)
            }
        }
    }

    /// Unit vector from `q` toward the obstacle, used to pick an actuator.
    ///
    /// Planes point along the inward normal (toward the foot of the
    /// perpendicular); bounded shapes point at their center. `None` when
    /// `q` coincides with the center of a bounded shape.
    pub fn direction_from(&self, q: &Vec3) -> Option<Vec3> {
        match *self {
            SafetyField::Plane { normal, .. } => Some(-normal),
            SafetyField::Superellipsoid { center, .. } | SafetyField::SphereMargin { center, .. } => {
                let offset = center - q;
                let len = offset.norm();
                (len > DEGENERATE_RADIUS).then(|| offset / len)
            }
        }
    }

    /// Axis-aligned half extents for bounded shapes (used for corridor checks).
    pub fn half_extents(&self) -> Option<Vec3> {
        match *self {
            SafetyField::Plane { .. } => None,
            SafetyField::Superellipsoid { scale, .. } => Some(scale),
            SafetyField::SphereMargin { d_min, .. } => Some(Vec3::repeat(d_min)),
        }
    }
}

fn all_finite(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Position and velocity of the simulated drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub q: Vec3,
    pub qdot: Vec3,
}

impl UavState {
    pub fn at_rest(q: Vec3) -> Self {
        Self {
            q,
            qdot: Vec3::zeros(),
        }
    }
}

/// `f(x) = [qdot; 0]`, `g(x) = [0; I]` with a speed limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleIntegrator {
    pub v_max: f64,
}

impl Default for DoubleIntegrator {
    fn default() -> Self {
        Self { v_max: 5.0 }
    }
}

impl DoubleIntegrator {
    pub const STATE_DIM: usize = 6;
    pub const CONTROL_DIM: usize = 3;

    /// Semi-implicit Euler: velocity first (clamped to `v_max`), then position.
    pub fn step(&self, state: &UavState, u: &Vec3, dt: f64) -> UavState {
        debug_assert!(dt > 0.0);
        let qdot = clamp_norm(state.qdot + u * dt, self.v_max);
        UavState {
            q: state.q + qdot * dt,
            qdot,
        }
    }
}

/// Scales `v` down to length `max` if it is longer.
pub fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let len = v.norm();
    if len > max {
        v * (max / len)
    } else {
        v
    }
}

/// Component-wise clamp to `[-limit, limit]`.
pub fn clamp_box(v: Vec3, limit: f64) -> Vec3 {
    v.map(|x| x.clamp(-limit, limit))
}

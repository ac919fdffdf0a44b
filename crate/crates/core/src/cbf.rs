//! Control-barrier constraints for the double integrator and the
//! minimum-norm safety projections built on them.
//!
//! For relative degree two the barrier condition
//! `L_f^2 h + L_g L_f h u + k1 h + k2 L_f h >= 0` becomes, with
//! `f = [qdot; 0]` and `g = [0; I]`, the half-space `grad_h . u >= b` where
//! `b = -(qdot' H qdot + k1 h + k2 grad_h . qdot)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, SafetyField, UavState, Vec3};

/// Gradients shorter than this are treated as vanished.
pub const GRADIENT_EPS: f64 = 1e-9;
/// Below this distance a projection counts as "no change".
pub const ACTIVE_EPS: f64 = 1e-12;

pub const DYKSTRA_TOL: f64 = 1e-9;
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;

pub type ObstacleId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("constraint {obstacle_id} is violated but its gradient vanished")]
    InfeasibleDegenerate { obstacle_id: ObstacleId },
    #[error("projection did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NotConverged {
        best: Vec3,
        residual: f64,
        sweeps: usize,
    },
    #[error("no constraints given")]
    Empty,
    #[error("invalid gains: {0}")]
    InvalidGains(String),
}

/// Row gain `[k1, k2]` acting on `[h, L_f h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfGains {
    pub k1: f64,
    pub k2: f64,
}

impl Default for CbfGains {
    fn default() -> Self {
        Self { k1: 4.0, k2: 4.0 }
    }
}

impl CbfGains {
    pub fn new(k1: f64, k2: f64) -> Result<Self, SolverError> {
        let gains = Self { k1, k2 };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.k1.is_finite() && self.k2.is_finite()) {
            return Err(SolverError::InvalidGains(format!(
                "k1 = {}, k2 = {} (both must be positive)",
                self.k1, self.k2
            )));
        }
        Ok(())
    }
}

/// `{u : a . u >= b}` for one obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceConstraint {
    pub a: Vec3,
    pub b: f64,
    pub obstacle_id: ObstacleId,
}

impl HalfspaceConstraint {
    pub fn slack(&self, u: &Vec3) -> f64 {
        self.a.dot(u) - self.b
    }

    pub fn is_satisfied(&self, u: &Vec3) -> bool {
        self.slack(u) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeInput {
    pub u_safe: Vec3,
    pub active: bool,
    /// `|u_safe - u_ref|`
    pub violation: f64,
}

impl SafeInput {
    fn from_projection(u_ref: &Vec3, u_safe: Vec3) -> Self {
        let violation = (u_safe - u_ref).norm();
        if violation > ACTIVE_EPS {
            Self {
                u_safe,
                active: true,
                violation,
            }
        } else {
            Self::passthrough(u_ref)
        }
    }

    fn passthrough(u_ref: &Vec3) -> Self {
        Self {
            u_safe: *u_ref,
            active: false,
            violation: 0.0,
        }
    }
}

pub fn build_constraint(
    field: &SafetyField,
    state: &UavState,
    gains: &CbfGains,
    obstacle_id: ObstacleId,
) -> Result<HalfspaceConstraint, GeometryError> {
    let q = &state.q;
    let v = &state.qdot;
    let h = field.eval_h(q);
    let grad = field.grad_h(q)?;
    let hess = field.hess_h(q)?;
    let lf2h = v.dot(&(hess * v));
    let lfh = grad.dot(v);
    Ok(HalfspaceConstraint {
        a: grad,
        b: -(lf2h + gains.k1 * h + gains.k2 * lfh),
        obstacle_id,
    })
}

/// Closed-form minimum-norm correction onto a single half-space.
pub fn project_halfspace(u_ref: &Vec3, c: &HalfspaceConstraint) -> Result<SafeInput, SolverError> {
    let slack = c.slack(u_ref);
    if slack >= 0.0 {
        return Ok(SafeInput::passthrough(u_ref));
    }
    let norm_sq = c.a.norm_squared();
    if norm_sq.sqrt() <= GRADIENT_EPS {
        return Err(SolverError::InfeasibleDegenerate {
            obstacle_id: c.obstacle_id,
        });
    }
    let u_safe = u_ref + c.a * (-slack / norm_sq);
    Ok(SafeInput::from_projection(u_ref, u_safe))
}

/// Euclidean projection onto the intersection of half-spaces (Dykstra).
///
/// Constraints are rescaled to unit normals first so obstacles whose
/// barrier values differ by many orders of magnitude are treated evenly.
/// Stops once both the iterate and every per-constraint correction move by
/// less than [`DYKSTRA_TOL`] over a sweep.
pub fn project_intersection(
    u_ref: &Vec3,
    cs: &[HalfspaceConstraint],
) -> Result<SafeInput, SolverError> {
    if cs.is_empty() {
        return Err(SolverError::Empty);
    }
    if cs.iter().all(|c| c.is_satisfied(u_ref)) {
        return Ok(SafeInput::passthrough(u_ref));
    }

    let mut normals: Vec<(Vec3, f64)> = Vec::with_capacity(cs.len());
    for c in cs {
        let len = c.a.norm();
        if len <= GRADIENT_EPS {
            if c.b > 0.0 {
                return Err(SolverError::InfeasibleDegenerate {
                    obstacle_id: c.obstacle_id,
                });
            }
            continue;
        }
        normals.push((c.a / len, c.b / len));
    }
    if normals.len() == 1 {
        let (a, b) = normals[0];
        let slack = a.dot(u_ref) - b;
        let u_safe = if slack < 0.0 { u_ref - a * slack } else { *u_ref };
        return Ok(SafeInput::from_projection(u_ref, u_safe));
    }

    let mut x = *u_ref;
    let mut corrections = vec![Vec3::zeros(); normals.len()];
    for sweep in 1..=DYKSTRA_MAX_SWEEPS {
        let start = x;
        let mut correction_change = 0.0;
        for ((a, b), p) in normals.iter().zip(corrections.iter_mut()) {
            let y = x + *p;
            let slack = a.dot(&y) - b;
            let next = if slack < 0.0 { y - a * slack } else { y };
            let new_p = y - next;
            correction_change += (new_p - *p).norm_squared();
            *p = new_p;
            x = next;
        }
        if (x - start).norm() < DYKSTRA_TOL && correction_change.sqrt() < DYKSTRA_TOL {
            return Ok(SafeInput::from_projection(u_ref, x));
        }
        if sweep == DYKSTRA_MAX_SWEEPS {
            let residual = normals
                .iter()
                .map(|(a, b)| (b - a.dot(&x)).max(0.0))
                .fold(0.0, f64::max);
            return Err(SolverError::NotConverged {
                best: x,
                residual,
                sweeps: sweep,
            });
        }
    }
    unreachable!("loop returns on the final sweep")
}

/// Builds one constraint per field, skipping fields whose gradient is
/// undefined at the current position. Skipped obstacle ids are returned.
pub fn build_constraints(
    fields: &[SafetyField],
    state: &UavState,
    gains: &CbfGains,
) -> (Vec<HalfspaceConstraint>, Vec<ObstacleId>) {
    let mut constraints = Vec::with_capacity(fields.len());
    let mut skipped = Vec::new();
    for (id, field) in fields.iter().enumerate() {
        match build_constraint(field, state, gains, id) {
            Ok(c) => constraints.push(c),
            Err(_) => skipped.push(id),
        }
    }
    (constraints, skipped)
}

/// Global safe input over all fields. An infeasible or unconverged
/// intersection falls back to the best iterate found.
pub fn global_safe_input(
    u_ref: &Vec3,
    fields: &[SafetyField],
    state: &UavState,
    gains: &CbfGains,
) -> Vec3 {
    let (constraints, _) = build_constraints(fields, state, gains);
    let usable: Vec<_> = constraints
        .into_iter()
        .filter(|c| c.a.norm() > GRADIENT_EPS)
        .collect();
    if usable.is_empty() {
        return *u_ref;
    }
    match project_intersection(u_ref, &usable) {
        Ok(s) => s.u_safe,
        Err(SolverError::NotConverged { best, .. }) => best,
        Err(_) => *u_ref,
    }
}

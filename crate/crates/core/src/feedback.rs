//! Multi-obstacle haptic rendering.
//!
//! Each obstacle gets its own single-constraint safety projection. When the
//! pilot's command violates an obstacle's barrier, the correction magnitude
//! (scaled by `k_v`) drives the actuator whose body direction is closest to
//! the obstacle, so several obstacles can be felt at once.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::{
    self, build_constraint, project_halfspace, CbfGains, ObstacleId, SolverError, GRADIENT_EPS,
};
use crate::geometry::{SafetyField, UavState, Vec3};

pub const NUM_ACTUATORS: usize = 32;
pub const MAX_LEVEL: u8 = 15;
pub const NUM_FREQUENCIES: u8 = 8;

/// Polar angles of the four actuator rings, top to bottom.
pub const RING_THETAS: [f64; 4] = [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2, 2.0 * FRAC_PI_3];
/// Azimuths within a ring.
pub const RING_PHIS: [f64; 8] = [
    -3.0 * FRAC_PI_4,
    -FRAC_PI_2,
    -FRAC_PI_4,
    0.0,
    FRAC_PI_4,
    FRAC_PI_2,
    3.0 * FRAC_PI_4,
    PI,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("layout must have exactly {NUM_ACTUATORS} actuators, got {0}")]
    WrongCount(usize),
    #[error("direction {index} is not unit length")]
    NotUnit { index: usize },
}

/// Body-frame direction for polar angle `theta` (from +z) and azimuth `phi`
/// (from +x toward +y). Body frame: x forward, y left, z up.
pub fn spherical_to_direction(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// Inverse of [`spherical_to_direction`] for a unit vector; `phi` in `(-pi, pi]`.
pub fn direction_to_spherical(dir: &Vec3) -> (f64, f64) {
    let theta = dir.z.clamp(-1.0, 1.0).acos();
    let mut phi = dir.y.atan2(dir.x);
    if phi <= -PI {
        phi += 2.0 * PI;
    }
    (theta, phi)
}

/// The 32 canonical `(theta, phi)` pairs, ring-major.
pub fn canonical_angles() -> [(f64, f64); NUM_ACTUATORS] {
    let mut out = [(0.0, 0.0); NUM_ACTUATORS];
    for (r, &theta) in RING_THETAS.iter().enumerate() {
        for (s, &phi) in RING_PHIS.iter().enumerate() {
            out[r * RING_PHIS.len() + s] = (theta, phi);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLayout {
    directions: Vec<Vec3>,
    positions: Option<Vec<Vec3>>,
}

impl Default for ActuatorLayout {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ActuatorLayout {
    pub fn canonical() -> Self {
        Self {
            directions: canonical_angles()
                .iter()
                .map(|&(t, p)| spherical_to_direction(t, p))
                .collect(),
            positions: None,
        }
    }

    pub fn new(directions: Vec<Vec3>, positions: Option<Vec<Vec3>>) -> Result<Self, LayoutError> {
        if directions.len() != NUM_ACTUATORS {
            return Err(LayoutError::WrongCount(directions.len()));
        }
        if let Some(p) = &positions {
            if p.len() != NUM_ACTUATORS {
                return Err(LayoutError::WrongCount(p.len()));
            }
        }
        for (index, d) in directions.iter().enumerate() {
            if (d.norm() - 1.0).abs() > 1e-9 {
                return Err(LayoutError::NotUnit { index });
            }
        }
        Ok(Self {
            directions,
            positions,
        })
    }

    pub fn with_positions(positions: Vec<Vec3>) -> Result<Self, LayoutError> {
        Self::new(Self::canonical().directions, Some(positions))
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn positions(&self) -> Option<&[Vec3]> {
        self.positions.as_deref()
    }
}

/// Index of the actuator most aligned with a world-frame obstacle direction.
/// The direction is rotated into the yaw-aligned body frame first; exact ties
/// go to the lowest index.
pub fn select_actuator(obstacle_dir_world: &Vec3, yaw: f64, layout: &ActuatorLayout) -> usize {
    let body = Rotation3::from_axis_angle(&Vec3::z_axis(), -yaw) * obstacle_dir_world;
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (k, r) in layout.directions().iter().enumerate() {
        let d = body.dot(r);
        if d > best_dot {
            best_dot = d;
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub gains: CbfGains,
    pub k_v: f64,
    /// Intensity mapped to level 15.
    pub i_max: f64,
    pub frequency_index: u8,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            gains: CbfGains::default(),
            k_v: 1.0,
            i_max: 10.0,
            // 133 Hz in the protocol's frequency table
            frequency_index: 3,
        }
    }
}

/// Linear 16-level quantization; any positive intensity maps to at least 1.
pub fn quantize(intensity: f64, i_max: f64) -> u8 {
    if intensity <= 0.0 || intensity.is_nan() {
        return 0;
    }
    let level = (16.0 * intensity / i_max).floor();
    level.clamp(1.0, f64::from(MAX_LEVEL)) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackFrame {
    pub intensities: [f64; NUM_ACTUATORS],
    pub levels: [u8; NUM_ACTUATORS],
    pub frequency_index: u8,
    /// Obstacles feeding each channel.
    pub contributing: Vec<Vec<ObstacleId>>,
    /// Obstacles whose constraint could not be built or solved this tick.
    pub skipped: Vec<ObstacleId>,
}

impl FeedbackFrame {
    pub fn silent(frequency_index: u8) -> Self {
        Self {
            intensities: [0.0; NUM_ACTUATORS],
            levels: [0; NUM_ACTUATORS],
            frequency_index,
            contributing: vec![Vec::new(); NUM_ACTUATORS],
            skipped: Vec::new(),
        }
    }

    pub fn active_channels(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(j, _)| j)
    }

    /// `sum_j level_j * r_j` in the body frame.
    pub fn weighted_direction(&self, layout: &ActuatorLayout) -> Vec3 {
        self.levels
            .iter()
            .zip(layout.directions())
            .map(|(&l, r)| r * f64::from(l))
            .sum()
    }

    /// Flat record: 32 levels followed by 32 raw intensities.
    pub fn to_flat(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|&l| f64::from(l))
            .chain(self.intensities.iter().copied())
            .collect()
    }
}

pub fn render_feedback(
    state: &UavState,
    yaw: f64,
    u_ref: &Vec3,
    fields: &[SafetyField],
    layout: &ActuatorLayout,
    cfg: &FeedbackConfig,
) -> FeedbackFrame {
    let mut frame = FeedbackFrame::silent(cfg.frequency_index);
    for (id, field) in fields.iter().enumerate() {
        let Ok(constraint) = build_constraint(field, state, &cfg.gains, id) else {
            frame.skipped.push(id);
            continue;
        };
        let local = match project_halfspace(u_ref, &constraint) {
            Ok(s) => s,
            Err(_) => {
                frame.skipped.push(id);
                continue;
            }
        };
        if !local.active {
            continue;
        }
        let Some(dir) = field.direction_from(&state.q) else {
            frame.skipped.push(id);
            continue;
        };
        let j = select_actuator(&dir, yaw, layout);
        let intensity = (cfg.k_v * (local.u_safe - u_ref)).norm();
        frame.intensities[j] = frame.intensities[j].max(intensity);
        frame.contributing[j].push(id);
    }
    for j in 0..NUM_ACTUATORS {
        frame.levels[j] = quantize(frame.intensities[j], cfg.i_max);
    }
    frame
}

/// Single force vector from the all-obstacle projection, as rendered on a
/// force-feedback joystick.
pub fn render_global_force(
    state: &UavState,
    u_ref: &Vec3,
    fields: &[SafetyField],
    cfg: &FeedbackConfig,
) -> Result<Vec3, SolverError> {
    let (constraints, _) = cbf::build_constraints(fields, state, &cfg.gains);
    let usable: Vec<_> = constraints
        .into_iter()
        .filter(|c| c.a.norm() > GRADIENT_EPS || c.b > 0.0)
        .collect();
    if usable.is_empty() {
        return Ok(Vec3::zeros());
    }
    let safe = cbf::project_intersection(u_ref, &usable)?;
    Ok((safe.u_safe - u_ref) * cfg.k_v)
}

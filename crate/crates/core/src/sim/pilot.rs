//! Scripted pilots standing in for human operators.

use nalgebra::Rotation3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::scenario::Scenario;
use crate::feedback::{ActuatorLayout, FeedbackFrame};
use crate::geometry::{clamp_box, clamp_norm, SafetyField, UavState, Vec3};

/// Where a goal seeker tries to fly within the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    /// The tunnel's center line; the pilot does not know where the free
    /// corridor is.
    #[default]
    Center,
    /// The scenario's guaranteed free line.
    Corridor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PilotKind {
    GoalSeeker,
    NoisyGoalSeeker { seed: u64 },
    /// Recorded commands, one per physics tick; zero once exhausted.
    Replay { commands: Vec<Vec3> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub kind: PilotKind,
    #[serde(default)]
    pub lane: Lane,
    /// Steers away from felt vibration: adds `-beta * sum_j level_j r_j`.
    #[serde(default)]
    pub haptic_reactive: bool,
    /// Executes the globally safe input instead of its own command.
    #[serde(default)]
    pub full_compliance: bool,
}

impl PilotSpec {
    pub fn goal_seeker() -> Self {
        Self {
            kind: PilotKind::GoalSeeker,
            lane: Lane::Center,
            haptic_reactive: false,
            full_compliance: false,
        }
    }

    pub fn haptic_reactive() -> Self {
        Self {
            haptic_reactive: true,
            ..Self::goal_seeker()
        }
    }

    pub fn compliant() -> Self {
        Self {
            lane: Lane::Corridor,
            full_compliance: true,
            ..Self::goal_seeker()
        }
    }

    pub fn noisy(seed: u64) -> Self {
        Self {
            kind: PilotKind::NoisyGoalSeeker { seed },
            ..Self::goal_seeker()
        }
    }

    pub fn replay(commands: Vec<Vec3>) -> Self {
        Self {
            kind: PilotKind::Replay { commands },
            ..Self::goal_seeker()
        }
    }
}

/// What a pilot can perceive on a tick.
pub struct Observation<'a> {
    pub tick: u64,
    pub state: &'a UavState,
    pub yaw: f64,
    /// Feedback rendered on the previous tick.
    pub frame: &'a FeedbackFrame,
    pub layout: &'a ActuatorLayout,
    pub scenario: &'a Scenario,
}

pub struct Pilot {
    spec: PilotSpec,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl Pilot {
    pub fn new(spec: PilotSpec, cfg: &SimConfig) -> Self {
        let noise = match spec.kind {
            PilotKind::NoisyGoalSeeker { seed } => Some((
                ChaCha8Rng::seed_from_u64(seed),
                Normal::new(0.0, cfg.pilot.noise_std).expect("validated noise std"),
            )),
            _ => None,
        };
        Self { spec, noise }
    }

    pub fn spec(&self) -> &PilotSpec {
        &self.spec
    }

    /// Reference acceleration for this tick, inside the input box.
    pub fn command(&mut self, obs: &Observation<'_>, cfg: &SimConfig) -> Vec3 {
        let mut u = match &self.spec.kind {
            PilotKind::Replay { commands } => commands
                .get(obs.tick as usize)
                .copied()
                .unwrap_or_else(Vec3::zeros),
            PilotKind::GoalSeeker | PilotKind::NoisyGoalSeeker { .. } => {
                seek_goal(obs, self.spec.lane, cfg)
            }
        };
        if let Some((rng, normal)) = &mut self.noise {
            u += Vec3::from_fn(|_, _| normal.sample(rng));
        }
        if self.spec.haptic_reactive {
            let felt_body = obs.frame.weighted_direction(obs.layout);
            let felt = Rotation3::from_axis_angle(&Vec3::z_axis(), obs.yaw) * felt_body;
            u -= felt * cfg.beta;
        }
        clamp_box(u, cfg.u_max)
    }
}

/// Whether a point lies inside the pilot's view cone around the camera axis.
pub fn in_view(state: &UavState, yaw: f64, target: &Vec3, cfg: &SimConfig) -> bool {
    let offset = target - state.q;
    let dist = offset.norm();
    if dist > cfg.sight_range {
        return false;
    }
    if dist == 0.0 {
        return true;
    }
    let camera = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let cos = (camera.dot(&offset) / dist).clamp(-1.0, 1.0);
    cos.acos() < cfg.cone_half_angle_deg.to_radians()
}

/// Tracks cruise speed along the tunnel and a lateral lane, swerving around
/// visible obstacles that lie ahead.
fn seek_goal(obs: &Observation<'_>, lane: Lane, cfg: &SimConfig) -> Vec3 {
    let g = &cfg.pilot;
    let s = obs.scenario;
    let axis = s.axis();
    let q = obs.state.q;
    let lat = s.lateral(&q);

    let mut swerve = Vec3::zeros();
    for o in &s.obstacles {
        let SafetyField::Superellipsoid { center, scale, .. } = o.field else {
            continue;
        };
        if !in_view(obs.state, obs.yaw, &center, cfg) {
            continue;
        }
        let half_len = scale.dot(&axis.abs());
        let ahead = (center - q).dot(&axis);
        if ahead < -half_len {
            continue;
        }
        let lat_ext = scale - axis.abs() * half_len;
        let needed = lat_ext.norm() + g.clearance;
        let delta = lat - s.lateral(&center);
        let dist = delta.norm();
        if dist >= needed {
            continue;
        }
        let away = if dist > 1e-6 {
            delta / dist
        } else {
            // dead center: pass on the side nearer the tunnel axis
            let c_lat = s.lateral(&center);
            if c_lat.norm() > 1e-6 {
                -c_lat / c_lat.norm()
            } else {
                s.direction.lateral_basis()[0]
            }
        };
        swerve += away * (g.swerve_speed * (needed - dist) / needed);
    }

    let lane_target = match lane {
        Lane::Center => Vec3::zeros(),
        Lane::Corridor => s.corridor,
    };
    let lateral_v = if swerve.norm() > 0.0 {
        clamp_norm(swerve, g.swerve_speed)
    } else {
        clamp_norm((lane_target - lat) * g.kp_lateral, g.swerve_speed)
    };
    let v_des = axis * g.cruise_speed + lateral_v;
    (v_des - obs.state.qdot) * g.kd
}

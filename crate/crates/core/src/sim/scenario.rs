//! Randomized obstacle tunnels.
//!
//! A tunnel is a 5 x 5 m square duct, 50 m long, starting at the origin and
//! running along the flight direction. Fifteen obstacles are placed inside
//! it by rejection sampling so that a straight line parallel to the axis
//! (the corridor) keeps at least [`CORRIDOR_CLEARANCE`] from every
//! obstacle's bounding box.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{SafetyField, Vec3};

pub const TUNNEL_LENGTH: f64 = 50.0;
pub const TUNNEL_HALF_WIDTH: f64 = 2.5;
pub const NUM_OBSTACLES: usize = 15;
pub const CORRIDOR_CLEARANCE: f64 = 0.8;
pub const MAX_REJECTIONS: usize = 10_000;
pub const START_DISTANCE: f64 = 1.0;
/// Obstacle centers lie in this along-axis band.
pub const OBSTACLE_BAND: (f64, f64) = (6.0, 46.0);
pub const SCALE_RANGE: (f64, f64) = (0.3, 1.0);
/// Corridor offsets are drawn from `[-CORRIDOR_SPREAD, CORRIDOR_SPREAD]` per lateral axis.
pub const CORRIDOR_SPREAD: f64 = 1.2;
/// Gap kept between obstacles and the walls.
const WALL_GAP: f64 = 0.05;

pub const SCENARIO_FORMAT: &str = "vibroshield-scenario";
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("no valid obstacle placement after {0} rejections")]
    GenerationFailed(usize),
    #[error("scenario file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Right,
    Upward,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Forward, Direction::Right, Direction::Upward];

    /// Tunnel axis in the world frame (x forward, y left, z up).
    pub fn axis(self) -> Vec3 {
        match self {
            Direction::Forward => Vec3::x(),
            Direction::Right => -Vec3::y(),
            Direction::Upward => Vec3::z(),
        }
    }

    /// Two unit vectors spanning the tunnel cross-section.
    pub fn lateral_basis(self) -> [Vec3; 2] {
        match self {
            Direction::Forward => [Vec3::y(), Vec3::z()],
            Direction::Right => [Vec3::x(), Vec3::z()],
            Direction::Upward => [Vec3::x(), Vec3::y()],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Right => "right",
            Direction::Upward => "upward",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" | "fwd" => Ok(Direction::Forward),
            "right" | "r" => Ok(Direction::Right),
            "upward" | "up" => Ok(Direction::Upward),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sphere,
    Cube,
    Cylinder,
}

impl Shape {
    pub fn exponent(self) -> u32 {
        match self {
            Shape::Sphere => 2,
            Shape::Cube => 6,
            Shape::Cylinder => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub field: SafetyField,
}

/// Crossing this plane ends the trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPlane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl GoalPlane {
    pub fn reached(&self, q: &Vec3) -> bool {
        (q - self.point).dot(&self.normal) >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub direction: Direction,
    pub seed: u64,
    pub walls: Vec<SafetyField>,
    pub obstacles: Vec<Obstacle>,
    pub start: Vec3,
    pub goal: GoalPlane,
    /// Lateral offset (world frame) of the guaranteed free line.
    pub corridor: Vec3,
}

impl Scenario {
    /// Walls first, then obstacles; obstacle ids index into this list.
    pub fn fields(&self) -> Vec<SafetyField> {
        self.walls
            .iter()
            .copied()
            .chain(self.obstacles.iter().map(|o| o.field))
            .collect()
    }

    pub fn axis(&self) -> Vec3 {
        self.direction.axis()
    }

    /// Component of `q` perpendicular to the tunnel axis.
    pub fn lateral(&self, q: &Vec3) -> Vec3 {
        let d = self.axis();
        q - d * q.dot(&d)
    }

    pub fn without_obstacles(&self) -> Self {
        Self {
            obstacles: Vec::new(),
            ..self.clone()
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), ScenarioError> {
        serde_json::to_writer_pretty(
            writer,
            &ScenarioFile {
                format: SCENARIO_FORMAT.into(),
                version: SCENARIO_VERSION,
                scenario: self.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_reader(reader)?;
        if file.format != SCENARIO_FORMAT || file.version != SCENARIO_VERSION {
            return Err(ScenarioError::Format(format!(
                "unsupported scenario file {} v{}",
                file.format, file.version
            )));
        }
        let s = file.scenario;
        for f in s.fields() {
            f.validate().map_err(|e| ScenarioError::Format(e.to_string()))?;
        }
        Ok(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    format: String,
    version: u32,
    scenario: Scenario,
}

pub fn tunnel_walls(direction: Direction) -> Vec<SafetyField> {
    let mid = direction.axis() * (TUNNEL_LENGTH / 2.0);
    direction
        .lateral_basis()
        .iter()
        .flat_map(|e| [*e, -*e])
        .map(|e| SafetyField::plane(mid + e * TUNNEL_HALF_WIDTH, -e).expect("unit normal"))
        .collect()
}

pub fn generate_scenario(direction: Direction, seed: u64) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = direction.axis();
    let [e1, e2] = direction.lateral_basis();
    let corridor_lat = [
        rng.random_range(-CORRIDOR_SPREAD..=CORRIDOR_SPREAD),
        rng.random_range(-CORRIDOR_SPREAD..=CORRIDOR_SPREAD),
    ];

    let mut obstacles = Vec::with_capacity(NUM_OBSTACLES);
    let mut rejections = 0;
    while obstacles.len() < NUM_OBSTACLES {
        let shape = [Shape::Sphere, Shape::Cube, Shape::Cylinder][rng.random_range(0..3)];
        let a = rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1);
        // half extents in tunnel coordinates (along, lateral 1, lateral 2)
        let mut ext = [a, a, a];
        if shape == Shape::Cylinder {
            let long = rng.random_range(0..3);
            ext[long] = rng.random_range(a..=2.0 * a).min(TUNNEL_HALF_WIDTH - WALL_GAP);
        }
        let along = rng.random_range(OBSTACLE_BAND.0..=OBSTACLE_BAND.1);
        let lat: [f64; 2] = std::array::from_fn(|k| {
            let room = TUNNEL_HALF_WIDTH - WALL_GAP - ext[k + 1];
            rng.random_range(-room..=room)
        });
        if blocks_corridor(lat, [ext[1], ext[2]], corridor_lat) {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(ScenarioError::GenerationFailed(rejections));
            }
            continue;
        }
        let center = axis * along + e1 * lat[0] + e2 * lat[1];
        let scale = (axis * ext[0] + e1 * ext[1] + e2 * ext[2]).abs();
        let field = SafetyField::superellipsoid(center, scale, shape.exponent())
            .expect("sampled scales are positive");
        obstacles.push(Obstacle { shape, field });
    }

    Ok(Scenario {
        direction,
        seed,
        walls: tunnel_walls(direction),
        obstacles,
        start: axis * START_DISTANCE,
        goal: GoalPlane {
            point: axis * TUNNEL_LENGTH,
            normal: axis,
        },
        corridor: e1 * corridor_lat[0] + e2 * corridor_lat[1],
    })
}

/// Distance from the corridor point to the obstacle's lateral bounding box
/// is below the clearance.
fn blocks_corridor(lat: [f64; 2], ext: [f64; 2], corridor: [f64; 2]) -> bool {
    let gap: f64 = (0..2)
        .map(|k| ((corridor[k] - lat[k]).abs() - ext[k]).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt();
    gap < CORRIDOR_CLEARANCE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scenario() {
        for dir in Direction::ALL {
            assert_eq!(generate_scenario(dir, 5).unwrap(), generate_scenario(dir, 5).unwrap());
        }
        assert_ne!(
            generate_scenario(Direction::Forward, 5).unwrap(),
            generate_scenario(Direction::Forward, 6).unwrap()
        );
    }

    #[test]
    fn axes_follow_direction() {
        assert_eq!(generate_scenario(Direction::Forward, 1).unwrap().goal.normal, Vec3::x());
        assert_eq!(generate_scenario(Direction::Upward, 1).unwrap().goal.normal, Vec3::z());
        assert_eq!(generate_scenario(Direction::Right, 1).unwrap().goal.normal, -Vec3::y());
    }

    #[test]
    fn obstacles_inside_tunnel_and_clear_of_corridor() {
        for seed in 0..40 {
            for dir in Direction::ALL {
                let s = generate_scenario(dir, seed).unwrap();
                assert_eq!(s.walls.len(), 4);
                assert_eq!(s.obstacles.len(), NUM_OBSTACLES);
                let axis = dir.axis();
                for o in &s.obstacles {
                    let c = o.field.center();
                    let ext = o.field.half_extents().unwrap();
                    let along = c.dot(&axis);
                    assert!(along - ext.dot(&axis.abs()) > 0.0);
                    assert!(along + ext.dot(&axis.abs()) < TUNNEL_LENGTH);
                    for e in dir.lateral_basis() {
                        assert!(c.dot(&e).abs() + ext.dot(&e) <= TUNNEL_HALF_WIDTH);
                        // every point of the corridor line is outside the obstacle
                    }
                    for k in 0..=100 {
                        let p = s.corridor + axis * (k as f64 * 0.5);
                        assert!(o.field.eval_h(&p) > 0.0);
                    }
                }
                for w in &s.walls {
                    assert!(w.eval_h(&s.start) > 0.0);
                    assert!(w.eval_h(&(s.corridor + axis * 25.0)) > 1.0);
                }
            }
        }
    }

    #[test]
    fn scenario_file_round_trip() {
        let s = generate_scenario(Direction::Right, 9).unwrap();
        let mut buf = Vec::new();
        s.write_json(&mut buf).unwrap();
        assert_eq!(Scenario::read_json(buf.as_slice()).unwrap(), s);
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["version"] = 2.into();
        assert!(Scenario::read_json(v.to_string().as_bytes()).is_err());
    }
}

//! Wire messages of the `/session` socket. Every message is one JSON text
//! frame carrying the schema version `v` and a `type` tag.

use serde::{Deserialize, Serialize};

use crate::feedback::NUM_ACTUATORS;
use crate::geometry::{SafetyField, UavState, Vec3};
use crate::sim::scenario::{Direction, GoalPlane, Scenario, Shape};
use crate::sim::{Mode, TrialMetrics};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Pilot,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientCommand {
    /// Reference acceleration (m/s^2); clamped to the input box.
    pub u_ref: Vec3,
    #[serde(default)]
    pub yaw_rate: f64,
    /// Session time (ms) at which the command was issued.
    pub timestamp: f64,
}

impl ClientCommand {
    pub fn is_finite(&self) -> bool {
        self.u_ref.iter().all(|x| x.is_finite()) && self.yaw_rate.is_finite() && self.timestamp.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        v: u32,
        #[serde(default)]
        name: Option<String>,
    },
    Command {
        v: u32,
        #[serde(flatten)]
        command: ClientCommand,
    },
}

impl ClientMessage {
    pub fn version(&self) -> u32 {
        match self {
            ClientMessage::Hello { v, .. } | ClientMessage::Command { v, .. } => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSummary {
    pub shape: Shape,
    pub center: Vec3,
    pub scale: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSummary {
    pub center: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub direction: Direction,
    pub seed: u64,
    pub start: Vec3,
    pub goal: GoalPlane,
    pub walls: Vec<WallSummary>,
    pub obstacles: Vec<ObstacleSummary>,
}

impl From<&Scenario> for ScenarioSummary {
    fn from(s: &Scenario) -> Self {
        Self {
            direction: s.direction,
            seed: s.seed,
            start: s.start,
            goal: s.goal,
            walls: s
                .walls
                .iter()
                .filter_map(|w| match *w {
                    SafetyField::Plane { center, normal } => Some(WallSummary { center, normal }),
                    _ => None,
                })
                .collect(),
            obstacles: s
                .obstacles
                .iter()
                .filter_map(|o| match o.field {
                    SafetyField::Superellipsoid { center, scale, .. } => Some(ObstacleSummary {
                        shape: o.shape,
                        center,
                        scale,
                    }),
                    _ => None,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub tick: u64,
    /// Session time (ms), the clock command timestamps refer to.
    pub time_ms: f64,
    pub state: UavState,
    pub yaw: f64,
    /// Reference command applied during this tick.
    pub u_ref: Vec3,
    pub yaw_rate: f64,
    /// 32 levels followed by 32 raw intensities.
    pub feedback: Vec<f64>,
    pub frequency_index: u8,
    pub metrics: TrialMetrics,
}

impl Telemetry {
    pub fn levels(&self) -> [u8; NUM_ACTUATORS] {
        std::array::from_fn(|j| self.feedback[j] as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        v: u32,
        role: Role,
        mode: Mode,
        tick_hz: f64,
        dt: f64,
    },
    Scenario {
        v: u32,
        scenario: ScenarioSummary,
    },
    Telemetry {
        v: u32,
        #[serde(flatten)]
        telemetry: Box<Telemetry>,
    },
    Result {
        v: u32,
        metrics: TrialMetrics,
    },
    Error {
        v: u32,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            v: SCHEMA_VERSION,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Parses and version-checks a client frame.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    if msg.version() != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema version {} (server speaks {SCHEMA_VERSION})",
            msg.version()
        ));
    }
    if let ClientMessage::Command { command, .. } = &msg {
        if !command.is_finite() {
            return Err("command fields must be finite".into());
        }
    }
    Ok(msg)
}

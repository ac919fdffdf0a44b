//! Transport-free session state: the latest pilot command, the simulation
//! and the fixed-rate tick.

use super::messages::{ClientCommand, ScenarioSummary, ServerMessage, Telemetry, SCHEMA_VERSION};
use crate::feedback::ActuatorLayout;
use crate::geometry::Vec3;
use crate::sim::{Control, Mode, Scenario, SimConfig, Simulation, TrialError, TrialMetrics};

pub const TICK_HZ: f64 = 50.0;
/// Commands older than this (session time) are ignored.
pub const STALE_AFTER_MS: f64 = 200.0;

#[derive(Debug, Clone)]
pub struct SessionCore {
    sim: Simulation,
    substeps: u32,
    latest: Option<ClientCommand>,
}

impl SessionCore {
    pub fn new(scenario: Scenario, mode: Mode, cfg: SimConfig) -> Result<Self, TrialError> {
        let substeps = ((1.0 / TICK_HZ) / cfg.dt).round().max(1.0) as u32;
        Ok(Self {
            sim: Simulation::new(scenario, mode, cfg, ActuatorLayout::canonical(), false)?,
            substeps,
            latest: None,
        })
    }

    /// Physics steps per session tick.
    pub fn substeps(&self) -> u32 {
        self.substeps
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn time_ms(&self) -> f64 {
        self.sim.tick() as f64 * (self.sim.config().dt * 1000.0)
    }

    pub fn finished(&self) -> bool {
        self.sim.finished()
    }

    pub fn metrics(&self) -> &TrialMetrics {
        self.sim.metrics()
    }

    pub fn scenario_message(&self) -> ServerMessage {
        ServerMessage::Scenario {
            v: SCHEMA_VERSION,
            scenario: ScenarioSummary::from(self.sim.scenario()),
        }
    }

    /// Latest wins; an older command never replaces a newer one.
    pub fn submit(&mut self, cmd: ClientCommand) {
        if self.latest.is_none_or(|prev| cmd.timestamp >= prev.timestamp) {
            self.latest = Some(cmd);
        }
    }

    /// The command the next tick will apply.
    pub fn active_command(&self) -> (Vec3, f64) {
        match self.latest {
            Some(c) if self.time_ms() - c.timestamp <= STALE_AFTER_MS => (c.u_ref, c.yaw_rate),
            _ => (Vec3::zeros(), 0.0),
        }
    }

    /// Runs one session tick. Returns the telemetry frame, followed by the
    /// final result when the trial ends on this tick.
    pub fn tick(&mut self) -> Vec<ServerMessage> {
        if self.sim.finished() {
            return Vec::new();
        }
        let (u_ref, yaw_rate) = self.active_command();
        for _ in 0..self.substeps {
            self.sim.step(Control {
                u_ref,
                yaw_rate,
                execute_safe: false,
            });
            if self.sim.finished() {
                break;
            }
        }
        let frame = self.sim.frame();
        let telemetry = Telemetry {
            tick: self.sim.tick(),
            time_ms: self.time_ms(),
            state: *self.sim.state(),
            yaw: self.sim.yaw(),
            u_ref,
            yaw_rate,
            feedback: frame.to_flat(),
            frequency_index: frame.frequency_index,
            metrics: self.sim.metrics().clone(),
        };
        let mut out = vec![ServerMessage::Telemetry {
            v: SCHEMA_VERSION,
            telemetry: Box::new(telemetry),
        }];
        if self.sim.finished() {
            out.push(ServerMessage::Result {
                v: SCHEMA_VERSION,
                metrics: self.sim.metrics().clone(),
            });
        }
        out
    }
}

//! The per-tick shared-control loop and its metrics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::SimConfig;
use super::pilot::{Observation, Pilot, PilotSpec};
use super::scenario::Scenario;
use crate::cbf::global_safe_input;
use crate::feedback::{render_feedback, render_global_force, ActuatorLayout, FeedbackFrame, NUM_ACTUATORS};
use crate::geometry::{clamp_box, DoubleIntegrator, SafetyField, UavState, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// No assistance.
    Na,
    /// Force shared control: one correction vector pushed into the stick.
    Fsc,
    /// Vibrotactile shared control: per-obstacle cues on the body.
    Vsc,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Na, Mode::Fsc, Mode::Vsc];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Na => "na",
            Mode::Fsc => "fsc",
            Mode::Vsc => "vsc",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "na" => Ok(Mode::Na),
            "fsc" => Ok(Mode::Fsc),
            "vsc" => Ok(Mode::Vsc),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub q: Vec3,
    pub qdot: Vec3,
    pub yaw: f64,
    /// Pilot command after clamping.
    pub u_ref: Vec3,
    /// Command that reached the dynamics.
    pub u_exec: Vec3,
    /// Global safe input for the pilot's (possibly force-modified) command.
    pub u_safe: Vec3,
    pub levels: [u8; NUM_ACTUATORS],
    pub min_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub total_distance: f64,
    pub collisions: u32,
    /// Integral of `|u - u_safe|` over the trial (m/s).
    pub input_disagreement: f64,
    pub duration_s: f64,
    pub ticks: u64,
    pub outcome: Option<Outcome>,
    /// Ticks on which at least one barrier could not be evaluated.
    pub skipped_ticks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TickRecord>>,
}

impl TrialMetrics {
    fn empty(record_trace: bool) -> Self {
        Self {
            total_distance: 0.0,
            collisions: 0,
            input_disagreement: 0.0,
            duration_s: 0.0,
            ticks: 0,
            outcome: None,
            skipped_ticks: 0,
            trace: record_trace.then(Vec::new),
        }
    }

    /// Writes the trace as one JSON record per line.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in self.trace.iter().flatten() {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// The commands a replay pilot needs to reproduce this trial.
    pub fn recorded_commands(&self) -> Option<Vec<Vec3>> {
        self.trace.as_ref().map(|t| t.iter().map(|r| r.u_ref).collect())
    }
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] super::scenario::ScenarioError),
}

/// One tick's input to [`Simulation::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub u_ref: Vec3,
    pub yaw_rate: f64,
    pub execute_safe: bool,
}

/// Stateful per-tick pipeline shared by offline trials and live sessions.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    fields: Vec<SafetyField>,
    cfg: SimConfig,
    mode: Mode,
    layout: ActuatorLayout,
    dynamics: DoubleIntegrator,
    state: UavState,
    yaw: f64,
    frame: FeedbackFrame,
    prev_h: Vec<f64>,
    last_hit: Vec<Option<u64>>,
    metrics: TrialMetrics,
}

impl Simulation {
    pub fn new(
        scenario: Scenario,
        mode: Mode,
        cfg: SimConfig,
        layout: ActuatorLayout,
        record_trace: bool,
    ) -> Result<Self, TrialError> {
        cfg.validate().map_err(TrialError::Config)?;
        let fields = scenario.fields();
        let state = UavState::at_rest(scenario.start);
        let prev_h = fields.iter().map(|f| f.eval_h(&state.q)).collect();
        Ok(Self {
            last_hit: vec![None; fields.len()],
            frame: FeedbackFrame::silent(cfg.frequency_index),
            dynamics: DoubleIntegrator { v_max: cfg.v_max },
            metrics: TrialMetrics::empty(record_trace),
            scenario,
            fields,
            cfg,
            mode,
            layout,
            state,
            yaw: 0.0,
            prev_h,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &UavState {
        &self.state
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ActuatorLayout {
        &self.layout
    }

    /// Feedback rendered on the most recent tick (silent outside VSC).
    pub fn frame(&self) -> &FeedbackFrame {
        &self.frame
    }

    pub fn metrics(&self) -> &TrialMetrics {
        &self.metrics
    }

    pub fn tick(&self) -> u64 {
        self.metrics.ticks
    }

    pub fn finished(&self) -> bool {
        self.metrics.outcome.is_some()
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            tick: self.metrics.ticks,
            state: &self.state,
            yaw: self.yaw,
            frame: &self.frame,
            layout: &self.layout,
            scenario: &self.scenario,
        }
    }

    /// Advances one physics tick. No-op once the trial has ended.
    pub fn step(&mut self, control: Control) {
        if self.finished() {
            return;
        }
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let fb = cfg.feedback();
        let u_ref = clamp_box(control.u_ref, cfg.u_max);

        let mut skipped = false;
        let u_cmd = match self.mode {
            Mode::Fsc => match render_global_force(&self.state, &u_ref, &self.fields, &fb) {
                Ok(force) => u_ref + force * cfg.compliance,
                Err(_) => {
                    skipped = true;
                    u_ref
                }
            },
            Mode::Na | Mode::Vsc => u_ref,
        };
        self.frame = match self.mode {
            Mode::Vsc => render_feedback(&self.state, self.yaw, &u_cmd, &self.fields, &self.layout, &fb),
            Mode::Na | Mode::Fsc => FeedbackFrame::silent(cfg.frequency_index),
        };
        skipped |= !self.frame.skipped.is_empty();

        // cues above use the unclamped correction; the executed safe input obeys the box
        let u_safe = clamp_box(global_safe_input(&u_cmd, &self.fields, &self.state, &cfg.gains), cfg.u_max);
        let u_exec = if control.execute_safe { u_safe } else { u_cmd };
        self.metrics.input_disagreement += (u_cmd - u_safe).norm() * dt;

        let next = self.dynamics.step(&self.state, &u_exec, dt);
        self.metrics.total_distance += (next.q - self.state.q).norm();
        self.state = next;
        self.yaw = wrap_yaw(self.yaw + control.yaw_rate * dt);
        self.metrics.ticks += 1;
        let tick = self.metrics.ticks;
        self.metrics.duration_s = tick as f64 * dt;
        if skipped {
            self.metrics.skipped_ticks += 1;
        }

        let debounce_ticks = (cfg.collision_debounce_s / dt).round() as u64;
        let mut min_h = f64::INFINITY;
        for (i, field) in self.fields.iter().enumerate() {
            let h = field.eval_h(&self.state.q);
            min_h = min_h.min(h);
            let crossed = self.prev_h[i] >= -cfg.collision_slack && h < -cfg.collision_slack;
            let debounced = self.last_hit[i].is_none_or(|t| tick - t >= debounce_ticks);
            if crossed && debounced {
                self.metrics.collisions += 1;
                self.last_hit[i] = Some(tick);
            }
            self.prev_h[i] = h;
        }

        if let Some(trace) = &mut self.metrics.trace {
            trace.push(TickRecord {
                tick,
                t: self.metrics.duration_s,
                q: self.state.q,
                qdot: self.state.qdot,
                yaw: self.yaw,
                u_ref,
                u_exec,
                u_safe,
                levels: self.frame.levels,
                min_h,
            });
        }

        if self.scenario.goal.reached(&self.state.q) {
            self.metrics.outcome = Some(Outcome::Goal);
        } else if self.metrics.duration_s >= cfg.timeout_s - 0.5 * dt {
            self.metrics.outcome = Some(Outcome::Timeout);
        }
    }

    pub fn into_metrics(self) -> TrialMetrics {
        self.metrics
    }
}

fn wrap_yaw(yaw: f64) -> f64 {
    crate::layout::dataset::wrap_angle(yaw)
}

/// Runs a scripted pilot through a scenario until the goal or the timeout.
pub fn run_trial(
    scenario: &Scenario,
    pilot: &PilotSpec,
    mode: Mode,
    cfg: &SimConfig,
    record_trace: bool,
) -> Result<TrialMetrics, TrialError> {
    let mut sim = Simulation::new(
        scenario.clone(),
        mode,
        *cfg,
        ActuatorLayout::canonical(),
        record_trace,
    )?;
    let mut driver = Pilot::new(pilot.clone(), cfg);
    while !sim.finished() {
        let u_ref = driver.command(&sim.observation(), cfg);
        sim.step(Control {
            u_ref,
            yaw_rate: 0.0,
            execute_safe: pilot.full_compliance,
        });
    }
    Ok(sim.into_metrics())
}

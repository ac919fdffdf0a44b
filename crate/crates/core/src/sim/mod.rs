//! Scripted teleoperation trials in obstacle tunnels.

pub mod batch;
pub mod config;
pub mod pilot;
pub mod scenario;
pub mod trial;

pub use batch::{aggregate, run_batch, AggregateRow, BatchConfig, BatchRecord};
pub use config::{PilotGains, SimConfig};
pub use pilot::{Lane, Pilot, PilotKind, PilotSpec};
pub use scenario::{generate_scenario, Direction, Scenario, ScenarioError};
pub use trial::{run_trial, Control, Mode, Outcome, Simulation, TrialError, TrialMetrics};

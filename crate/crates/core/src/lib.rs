//! Haptic shared control for teleoperated drones.
//!
//! Pilot acceleration commands are checked against one control barrier
//! function per obstacle; every violated barrier drives the body actuator
//! that points toward its obstacle. The crate also contains the actuator
//! layout optimizer, the daisy-chain actuator protocol, a scripted
//! teleoperation simulator and a live session server.

pub mod cbf;
pub mod feedback;
pub mod geometry;
pub mod layout;
pub mod protocol;
pub mod server;
pub mod sim;

pub use cbf::{CbfGains, HalfspaceConstraint, SafeInput, SolverError};
pub use feedback::{ActuatorLayout, FeedbackConfig, FeedbackFrame, NUM_ACTUATORS};
pub use geometry::{DoubleIntegrator, SafetyField, UavState, Vec3};

use serde::{Deserialize, Serialize};

use crate::cbf::CbfGains;
use crate::feedback::FeedbackConfig;

/// Every tunable of a simulated trial. Missing keys in a config file take
/// the defaults below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub timeout_s: f64,
    /// Per-axis acceleration limit on pilot commands (m/s^2).
    pub u_max: f64,
    pub v_max: f64,
    pub gains: CbfGains,
    pub k_v: f64,
    pub i_max: f64,
    pub frequency_index: u8,
    /// Haptic-reactive steering gain.
    pub beta: f64,
    /// Fraction of the FSC force the pilot's hand yields to.
    pub compliance: f64,
    /// Half-angle of the scripted pilot's view cone, about the camera axis.
    pub cone_half_angle_deg: f64,
    /// Scripted pilots ignore obstacles farther than this (m).
    pub sight_range: f64,
    /// Minimum gap between two counted collisions with the same obstacle (s).
    pub collision_debounce_s: f64,
    /// Penetration below which a barrier crossing is treated as
    /// discretization error rather than a collision.
    pub collision_slack: f64,
    pub pilot: PilotGains,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            timeout_s: 120.0,
            u_max: 10.0,
            v_max: 5.0,
            gains: CbfGains::default(),
            k_v: 1.0,
            i_max: 10.0,
            frequency_index: 3,
            beta: 0.5,
            compliance: 0.5,
            cone_half_angle_deg: 90.0,
            sight_range: 8.0,
            collision_debounce_s: 1.0,
            collision_slack: 1e-3,
            pilot: PilotGains::default(),
        }
    }
}

impl SimConfig {
    pub fn feedback(&self) -> FeedbackConfig {
        FeedbackConfig {
            gains: self.gains,
            k_v: self.k_v,
            i_max: self.i_max,
            frequency_index: self.frequency_index,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("dt", self.dt),
            ("timeout_s", self.timeout_s),
            ("u_max", self.u_max),
            ("v_max", self.v_max),
            ("k_v", self.k_v),
            ("i_max", self.i_max),
            ("sight_range", self.sight_range),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        let nonneg = [
            ("beta", self.beta),
            ("compliance", self.compliance),
            ("collision_debounce_s", self.collision_debounce_s),
            ("collision_slack", self.collision_slack),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..=180.0).contains(&self.cone_half_angle_deg) {
            return Err("cone_half_angle_deg must lie in [0, 180]".into());
        }
        if self.frequency_index > 7 {
            return Err("frequency_index must lie in 0..=7".into());
        }
        self.gains.validate().map_err(|e| e.to_string())?;
        self.pilot.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }
}

/// Gains of the scripted goal-seeking pilot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotGains {
    /// Cruise speed along the tunnel (m/s).
    pub cruise_speed: f64,
    /// Velocity-tracking (derivative) gain.
    pub kd: f64,
    /// Lateral position (proportional) gain toward the chosen lane.
    pub kp_lateral: f64,
    /// Extra clearance the pilot keeps from obstacles it knows about (m).
    pub clearance: f64,
    /// Lateral speed used to swerve around a known obstacle (m/s).
    pub swerve_speed: f64,
    /// Standard deviation of the noisy pilot's acceleration noise (m/s^2).
    pub noise_std: f64,
}

impl Default for PilotGains {
    fn default() -> Self {
        Self {
            cruise_speed: 1.0,
            kd: 2.0,
            kp_lateral: 1.0,
            clearance: 0.4,
            swerve_speed: 2.0,
            noise_std: 1.0,
        }
    }
}

impl PilotGains {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("pilot.cruise_speed", self.cruise_speed),
            ("pilot.kd", self.kd),
            ("pilot.kp_lateral", self.kp_lateral),
            ("pilot.clearance", self.clearance),
            ("pilot.swerve_speed", self.swerve_speed),
            ("pilot.noise_std", self.noise_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

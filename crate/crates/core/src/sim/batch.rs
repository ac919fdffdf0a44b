//! Cartesian-product experiments over directions, modes and seeds.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::pilot::{PilotKind, PilotSpec};
use super::scenario::{generate_scenario, Direction};
use super::trial::{run_trial, Mode, Outcome, TrialMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    #[serde(default = "all_directions")]
    pub directions: Vec<Direction>,
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    #[serde(default = "PilotSpec::haptic_reactive")]
    pub pilot: PilotSpec,
    #[serde(default)]
    pub sim: SimConfig,
}

fn all_directions() -> Vec<Direction> {
    Direction::ALL.to_vec()
}

fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

impl BatchConfig {
    pub fn new(seeds: Vec<u64>) -> Self {
        Self {
            directions: all_directions(),
            modes: all_modes(),
            seeds,
            pilot: PilotSpec::haptic_reactive(),
            sim: SimConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.sim.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub direction: Direction,
    pub mode: Mode,
    pub seed: u64,
    pub result: Result<TrialMetrics, String>,
}

/// Runs every (direction, mode, seed) combination in parallel. Rows come
/// back in direction-major, then mode, then seed order. A noisy pilot's
/// noise seed is offset by the scenario seed so rows stay independent.
pub fn run_batch(cfg: &BatchConfig) -> Vec<BatchRecord> {
    let jobs: Vec<(Direction, Mode, u64)> = cfg
        .directions
        .iter()
        .flat_map(|&d| {
            cfg.modes
                .iter()
                .flat_map(move |&m| cfg.seeds.iter().map(move |&s| (d, m, s)))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(direction, mode, seed)| {
            let mut pilot = cfg.pilot.clone();
            if let PilotKind::NoisyGoalSeeker { seed: noise } = &mut pilot.kind {
                *noise = noise.wrapping_add(seed);
            }
            let result = generate_scenario(direction, seed)
                .map_err(|e| e.to_string())
                .and_then(|s| run_trial(&s, &pilot, mode, &cfg.sim, false).map_err(|e| e.to_string()));
            BatchRecord {
                direction,
                mode,
                seed,
                result,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub direction: Direction,
    pub mode: Mode,
    pub trials: usize,
    pub failed: usize,
    pub timeouts: usize,
    pub collisions_mean: f64,
    pub collisions_se: f64,
    pub disagreement_mean: f64,
    pub disagreement_se: f64,
    pub distance_mean: f64,
    pub distance_se: f64,
}

/// Mean and standard error of the mean (sample standard deviation / sqrt n).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One row per (direction, mode), sorted. Independent of record order.
pub fn aggregate(records: &[BatchRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Direction, Mode)> = records.iter().map(|r| (r.direction, r.mode)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(direction, mode)| {
            let mut rows: Vec<&BatchRecord> = records
                .iter()
                .filter(|r| r.direction == direction && r.mode == mode)
                .collect();
            // sum in seed order so the aggregate does not depend on input order
            rows.sort_by_key(|r| r.seed);
            let ok: Vec<&TrialMetrics> = rows.iter().filter_map(|r| r.result.as_ref().ok()).collect();
            let col = |f: fn(&TrialMetrics) -> f64| mean_se(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
            let (collisions_mean, collisions_se) = col(|m| f64::from(m.collisions));
            let (disagreement_mean, disagreement_se) = col(|m| m.input_disagreement);
            let (distance_mean, distance_se) = col(|m| m.total_distance);
            AggregateRow {
                direction,
                mode,
                trials: rows.len(),
                failed: rows.len() - ok.len(),
                timeouts: ok.iter().filter(|m| m.outcome == Some(Outcome::Timeout)).count(),
                collisions_mean,
                collisions_se,
                disagreement_mean,
                disagreement_se,
                distance_mean,
                distance_se,
            }
        })
        .collect()
}

pub fn write_aggregate_csv<W: Write>(writer: W, rows: &[AggregateRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RawRow<'a> {
    direction: Direction,
    mode: Mode,
    seed: u64,
    collisions: Option<u32>,
    input_disagreement: Option<f64>,
    total_distance: Option<f64>,
    duration_s: Option<f64>,
    outcome: Option<Outcome>,
    error: Option<&'a str>,
}

pub fn write_records_csv<W: Write>(writer: W, records: &[BatchRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        let m = r.result.as_ref().ok();
        w.serialize(RawRow {
            direction: r.direction,
            mode: r.mode,
            seed: r.seed,
            collisions: m.map(|m| m.collisions),
            input_disagreement: m.map(|m| m.input_disagreement),
            total_distance: m.map(|m| m.total_distance),
            duration_s: m.map(|m| m.duration_s),
            outcome: m.and_then(|m| m.outcome),
            error: r.result.as_ref().err().map(String::as_str),
        })?;
    }
    w.flush()?;
    Ok(())
}

//! One function per acceptance criterion. Each returns the measured
//! quantities; pass/fail thresholds live with the callers.

use std::collections::HashSet;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vibroshield::cbf::{global_safe_input, project_halfspace, project_intersection};
use vibroshield::feedback::{canonical_angles, render_feedback, render_global_force};
use vibroshield::layout::mlp::TrainingSet;
use vibroshield::layout::{
    generate_study, generate_synthetic_dataset, optimize_layout, train, BodyModel, Hyperparameters, InputEncoding, Mlp,
};
use vibroshield::protocol::{chain_latency, decode, encode, Chain, ChainConfig, ChainMessage, MAX_UNITS};
use vibroshield::sim::{aggregate, run_batch, BatchConfig, Direction, Mode};
use vibroshield::{
    ActuatorLayout, CbfGains, DoubleIntegrator, FeedbackConfig, HalfspaceConstraint, SafetyField, UavState, Vec3,
};

use super::*;

// ---------------------------------------------------------------- protocol

pub struct ProtocolReport {
    pub latency_20: Duration,
    pub messages: usize,
    pub distinct_encodings: usize,
    pub round_trip_failures: usize,
    /// Byte pairs outside the image of `encode` that `decode` accepted.
    pub accepted_garbage: usize,
    pub misdelivered: usize,
}

pub fn protocol() -> ProtocolReport {
    let latency_20 = chain_latency(&ChainConfig::default(), MAX_UNITS).unwrap();
    let mut seen = HashSet::new();
    let mut round_trip_failures = 0;
    let mut messages = 0;
    for address in 0..=127u8 {
        for start in [false, true] {
            for intensity_level in 0..=15u8 {
                for frequency_index in 0..=7u8 {
                    let msg = ChainMessage {
                        address,
                        start,
                        intensity_level,
                        frequency_index,
                    };
                    let bytes = encode(&msg).unwrap();
                    if decode(bytes) != Ok(msg) {
                        round_trip_failures += 1;
                    }
                    seen.insert(bytes);
                    messages += 1;
                }
            }
        }
    }
    let mut accepted_garbage = 0;
    for b0 in 0..=255u8 {
        for b1 in 0..=255u8 {
            if !seen.contains(&[b0, b1]) && decode([b0, b1]).is_ok() {
                accepted_garbage += 1;
            }
        }
    }
    let mut misdelivered = 0;
    for k in 1..=MAX_UNITS {
        let mut chain = Chain::new(MAX_UNITS).unwrap();
        let d = chain.inject(ChainMessage::start((k - 1) as u8, 9, 2));
        let lit: Vec<usize> = chain
            .units()
            .iter()
            .filter(|u| u.effective_level() > 0)
            .map(|u| u.unit_index)
            .collect();
        if d.executed_by != Some(k - 1) || d.forwards != k - 1 || lit != vec![k - 1] {
            misdelivered += 1;
        }
    }
    ProtocolReport {
        latency_20,
        messages,
        distinct_encodings: seen.len(),
        round_trip_failures,
        accepted_garbage,
        misdelivered,
    }
}

// ---------------------------------------------------------------- invariance

pub struct InvarianceReport {
    pub scenes: usize,
    pub min_h: f64,
    pub worst_scene: usize,
}

/// A random field whose barrier is comfortably positive at the origin.
fn random_clear_field(rng: &mut ChaCha8Rng) -> SafetyField {
    loop {
        let dir = random_unit(rng);
        let dist = rng.random_range(1.0..5.0);
        let field = match rng.random_range(0..3) {
            0 => SafetyField::plane(-dir * dist, dir).unwrap(),
            1 => {
                let scale = Vec3::new(
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.3..1.2),
                );
                let exponent = [2, 4, 6][rng.random_range(0..3)];
                SafetyField::superellipsoid(dir * (dist + 1.0), scale, exponent).unwrap()
            }
            _ => SafetyField::sphere_margin(dir * dist, rng.random_range(0.3..0.9)).unwrap(),
        };
        if field.eval_h(&Vec3::zeros()) > 0.05 {
            return field;
        }
    }
}

/// Scenes of 1-5 fields around a drone at the origin with a random initial
/// velocity inside the second-order safe set of every field
/// (`h_dot + r h >= 0`, `r` the repeated root of the default gains).
pub fn random_scene(rng: &mut ChaCha8Rng, gains: &CbfGains) -> (Vec<SafetyField>, UavState, Vec3) {
    let count = rng.random_range(1..=5);
    let fields: Vec<SafetyField> = (0..count).map(|_| random_clear_field(rng)).collect();
    let root = gains.k2 / 2.0;
    let state = loop {
        let v = random_unit(rng) * rng.random_range(0.0..3.0);
        let ok = fields.iter().all(|f| {
            let g = f.grad_h(&Vec3::zeros()).unwrap();
            g.dot(&v) + root * f.eval_h(&Vec3::zeros()) >= 0.0
        });
        if ok {
            break UavState { q: Vec3::zeros(), qdot: v };
        }
    };
    let goal = random_unit(rng) * rng.random_range(6.0..10.0);
    (fields, state, goal)
}

pub fn forward_invariance(scenes: usize, seed: u64) -> InvarianceReport {
    let gains = CbfGains::default();
    let model = DoubleIntegrator::default();
    let dt = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_h = f64::INFINITY;
    let mut worst_scene = 0;
    for scene in 0..scenes {
        let (fields, mut state, goal) = random_scene(&mut rng, &gains);
        let wobble = random_vec(&mut rng, 4.0);
        for tick in 0..1000 {
            let t = tick as f64 * dt;
            // aggressive goal seeking plus a slow sinusoidal disturbance
            let u_ref = vibroshield::geometry::clamp_box(
                (goal - state.q) * 3.0 - state.qdot * 1.5 + wobble * (1.3 * t).sin(),
                10.0,
            );
            let u = global_safe_input(&u_ref, &fields, &state, &gains);
            state = model.step(&state, &u, dt);
            for f in &fields {
                let h = f.eval_h(&state.q);
                if h < min_h {
                    min_h = h;
                    worst_scene = scene;
                }
            }
        }
    }
    InvarianceReport {
        scenes,
        min_h,
        worst_scene,
    }
}

// ---------------------------------------------------------------- QP

fn constraint(a: Vec3, b: f64, id: usize) -> HalfspaceConstraint {
    HalfspaceConstraint { a, b, obstacle_id: id }
}

/// Random instance whose constraints share a witness point, so it is feasible.
pub fn random_qp_instance(rng: &mut ChaCha8Rng, m: usize) -> (Vec3, Vec<(Vec3, f64)>) {
    let witness = random_vec(rng, 3.0);
    let cs = (0..m)
        .map(|_| {
            let a = random_unit(rng) * rng.random_range(0.1..5.0);
            let b = a.dot(&witness) - rng.random_range(0.0..2.0);
            (a, b)
        })
        .collect();
    (random_vec(rng, 6.0), cs)
}

/// Largest distance between `project_halfspace` and the grid oracle.
pub fn halfspace_vs_grid(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (u, cs) = random_qp_instance(&mut rng, 1);
        let (a, b) = cs[0];
        let got = project_halfspace(&u, &constraint(a, b, 0)).unwrap().u_safe;
        worst = worst.max((got - grid_halfspace_projection(&u, &a, b)).norm());
    }
    worst
}

/// Largest distance between `project_intersection` and active-set
/// enumeration over instances of 1 to 3 constraints.
pub fn intersection_vs_kkt(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let (u, cs) = random_qp_instance(&mut rng, 1 + i % 3);
        let hs: Vec<_> = cs.iter().enumerate().map(|(k, &(a, b))| constraint(a, b, k)).collect();
        let got = project_intersection(&u, &hs).unwrap().u_safe;
        let oracle = kkt_enumeration(&u, &cs).expect("instances are feasible");
        worst = worst.max((got - oracle).norm());
    }
    worst
}

// ---------------------------------------------------------------- gradients

#[derive(Clone, Copy, Debug)]
pub enum FieldKind {
    Plane,
    Superellipsoid,
    SphereMargin,
}

/// Worst gradient and Hessian errors against finite differences, each
/// component measured relative to the largest entry of its vector/matrix.
pub fn field_derivative_errors(kind: FieldKind, points: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    let mut checked = 0;
    while checked < points {
        let field = match kind {
            FieldKind::Plane => random_plane(&mut rng),
            FieldKind::Superellipsoid => random_superellipsoid(&mut rng),
            FieldKind::SphereMargin => random_sphere_margin(&mut rng),
        };
        let reach = field.half_extents().map_or(4.0, |e| 3.0 * e.max());
        let q = field.center() + random_vec(&mut rng, reach);
        if (q - field.center()).norm() < 1e-3 {
            continue;
        }
        let g = field.grad_h(&q).unwrap();
        let g_fd = fd_grad(&field, &q, FD_STEP);
        let g_scale = g.amax();
        for k in 0..3 {
            worst_g = worst_g.max((g[k] - g_fd[k]).abs() / g[k].abs().max(g_scale));
        }
        let h = field.hess_h(&q).unwrap();
        let h_fd = fd_hess(&field, &q, FD_STEP);
        let h_scale = h.amax().max(1e-12);
        for (a, b) in h.iter().zip(h_fd.iter()) {
            worst_h = worst_h.max((a - b).abs() / a.abs().max(h_scale));
        }
        checked += 1;
    }
    (worst_g, worst_h)
}

/// Worst relative error between backprop and central differences of the
/// training objective (MSE plus smoothness term) on `probes` parameters
/// spread over every layer.
pub fn mlp_backprop_error(probes: usize, lambda: f64) -> f64 {
    let body = BodyModel::default();
    let samples = generate_synthetic_dataset(&body, 12, 2, 5);
    let data = TrainingSet::from_samples(&samples);
    let mut net = Mlp::new(InputEncoding::AnglesTrig, 3);
    net.fit_output_normalization(&data);
    let (_, grads) = net.objective(&data, lambda);
    let flat = grads.flat();
    let n = net.param_count();
    let step = 1e-6;
    let mut worst = 0.0f64;
    for p in 0..probes {
        let idx = (p * 7919 + 13) % n;
        let original = net.param(idx);
        net.set_param(idx, original + step);
        let plus = net.objective(&data, lambda).0.total;
        net.set_param(idx, original - step);
        let minus = net.objective(&data, lambda).0.total;
        net.set_param(idx, original);
        let fd = (plus - minus) / (2.0 * step);
        let err = (flat[idx] - fd).abs() / flat[idx].abs().max(fd.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

// ---------------------------------------------------------------- MultiCBF

pub struct MultiCbfReport {
    pub active_actuators: usize,
    pub local_violations: Vec<f64>,
    pub global_force: f64,
}

/// Two identical spheres ahead-left and ahead-right of a drone flying
/// straight between them fast enough that, with `u_ref = 0`, both barriers
/// demand braking away from their own obstacle.
pub fn symmetric_two_obstacle_scene() -> (UavState, Vec<SafetyField>, FeedbackConfig) {
    let radius = Vec3::repeat(0.5);
    let fields = vec![
        SafetyField::superellipsoid(Vec3::new(1.5, 1.2, 0.0), radius, 2).unwrap(),
        SafetyField::superellipsoid(Vec3::new(1.5, -1.2, 0.0), radius, 2).unwrap(),
    ];
    let state = UavState {
        q: Vec3::zeros(),
        qdot: Vec3::new(3.0, 0.0, 0.0),
    };
    (state, fields, FeedbackConfig::default())
}

pub fn multicbf() -> MultiCbfReport {
    let (state, fields, cfg) = symmetric_two_obstacle_scene();
    let u_ref = Vec3::zeros();
    let frame = render_feedback(&state, 0.0, &u_ref, &fields, &ActuatorLayout::canonical(), &cfg);
    let local_violations = fields
        .iter()
        .enumerate()
        .map(|(id, f)| {
            let c = vibroshield::cbf::build_constraint(f, &state, &cfg.gains, id).unwrap();
            project_halfspace(&u_ref, &c).unwrap().violation * cfg.k_v
        })
        .collect();
    let global = render_global_force(&state, &u_ref, &fields, &cfg).unwrap();
    MultiCbfReport {
        active_actuators: frame.active_channels().count(),
        local_violations,
        global_force: global.norm(),
    }
}

pub fn min_canonical_angle_deg() -> f64 {
    let dirs: Vec<Vec3> = canonical_angles()
        .iter()
        .map(|&(t, p)| vibroshield::feedback::spherical_to_direction(t, p))
        .collect();
    min_pairwise_angle(&dirs).to_degrees()
}

// ---------------------------------------------------------------- behavior

pub struct BehaviorReport {
    pub seeds: usize,
    pub failed: usize,
    /// (direction, NA collisions, VSC collisions, NA disagreement, VSC disagreement), totals over seeds.
    pub rows: Vec<(Direction, u32, u32, f64, f64)>,
}

impl BehaviorReport {
    pub fn totals(&self) -> (u32, u32, f64, f64) {
        self.rows.iter().fold((0, 0, 0.0, 0.0), |acc, r| {
            (acc.0 + r.1, acc.1 + r.2, acc.2 + r.3, acc.3 + r.4)
        })
    }

    pub fn na_collisions(&self, d: Direction) -> u32 {
        self.rows.iter().find(|r| r.0 == d).map_or(0, |r| r.1)
    }
}

pub fn behavior(seeds: u64) -> BehaviorReport {
    let mut cfg = BatchConfig::new((0..seeds).collect());
    cfg.modes = vec![Mode::Na, Mode::Vsc];
    let records = run_batch(&cfg);
    let failed = records.iter().filter(|r| r.result.is_err()).count();
    let total = |d: Direction, m: Mode| -> (u32, f64) {
        records
            .iter()
            .filter(|r| r.direction == d && r.mode == m)
            .filter_map(|r| r.result.as_ref().ok())
            .fold((0, 0.0), |acc, t| (acc.0 + t.collisions, acc.1 + t.input_disagreement))
    };
    let rows = Direction::ALL
        .iter()
        .map(|&d| {
            let (nc, nd) = total(d, Mode::Na);
            let (vc, vd) = total(d, Mode::Vsc);
            (d, nc, vc, nd, vd)
        })
        .collect();
    // keep the aggregate path exercised on the same records
    debug_assert_eq!(aggregate(&records).len(), 6);
    BehaviorReport {
        seeds: seeds as usize,
        failed,
        rows,
    }
}

// ---------------------------------------------------------------- layout

pub struct RecoveryReport {
    pub within_2cm: usize,
    pub worst_error: f64,
}

/// Zero-noise data from a spherical body, whose surface point for every
/// direction is unique.
pub fn layout_recovery() -> RecoveryReport {
    let radius = 0.16;
    let body = BodyModel::capsule(radius, 0.0);
    let data = generate_synthetic_dataset(&body, 800, 1, 7);
    let hp = Hyperparameters {
        epochs: 1000,
        learning_rate: 1e-2,
        lr_decay: 0.996,
        ..Hyperparameters::default()
    };
    let (model, _) = train(&data, &hp).unwrap();
    let layout = optimize_layout(&model, &body);
    let positions = layout.positions().unwrap();
    let errors: Vec<f64> = canonical_angles()
        .iter()
        .zip(positions)
        .map(|(&(t, p), got)| (got - capsule_point(radius, 0.0, t, p)).norm())
        .collect();
    RecoveryReport {
        within_2cm: errors.iter().filter(|&&e| e <= 0.02).count(),
        worst_error: errors.iter().cloned().fold(0.0, f64::max),
    }
}

/// Probe-grid smoothness of models trained with lambda 0 and 0.1 on the
/// same noisy multi-participant study.
pub fn smoothness_by_lambda() -> (f64, f64) {
    let body = BodyModel::default();
    let data = generate_study(&body, 2, 46, 5, 3);
    let tv = |lambda: f64| {
        let hp = Hyperparameters {
            lambda,
            epochs: 200,
            ..Hyperparameters::default()
        };
        train(&data, &hp).unwrap().0.network.tv_on_grid(32)
    };
    (tv(0.0), tv(0.1))
}

//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::criteria::*;
use vibroshield::sim::Direction;

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn run(name: &'static str, budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(limit) = budget {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; over the {:.0?} budget", limit));
        }
    }
    Line {
        name,
        pass,
        detail,
        elapsed,
    }
}

fn main() -> ExitCode {
    let mut lines = Vec::new();

    lines.push(run("protocol latency and bijectivity", Some(Duration::from_secs(1)), || {
        let r = protocol();
        let pass = r.latency_20 == Duration::from_micros(2500)
            && r.messages == 32_768
            && r.distinct_encodings == 32_768
            && r.round_trip_failures == 0
            && r.accepted_garbage == 0
            && r.misdelivered == 0;
        (
            pass,
            format!(
                "latency(20) = {:?}, {} messages, {} distinct, {} round-trip failures, {} foreign frames accepted, {} misdelivered",
                r.latency_20, r.messages, r.distinct_encodings, r.round_trip_failures, r.accepted_garbage, r.misdelivered
            ),
        )
    }));

    lines.push(run("barrier forward invariance", Some(Duration::from_secs(60)), || {
        let r = forward_invariance(100, 21);
        (
            r.min_h >= -1e-3,
            format!("{} scenes x 10 s, min h = {:.3e} (scene {})", r.scenes, r.min_h, r.worst_scene),
        )
    }));

    lines.push(run("projection correctness", None, || {
        let single = halfspace_vs_grid(1000, 10);
        let multi = intersection_vs_kkt(200, 11);
        (
            single <= 1e-6 && multi <= 1e-6,
            format!("halfspace vs grid {single:.2e}, intersection vs enumeration {multi:.2e}"),
        )
    }));

    lines.push(run("gradient fidelity", None, || {
        let mut pass = true;
        let mut parts = Vec::new();
        for (kind, seed) in [
            (FieldKind::Plane, 1),
            (FieldKind::Superellipsoid, 2),
            (FieldKind::SphereMargin, 3),
        ] {
            let (g, h) = field_derivative_errors(kind, 1000, seed);
            pass &= g <= 1e-4 && h <= 1e-3;
            parts.push(format!("{kind:?} grad {g:.1e} hess {h:.1e}"));
        }
        let mlp = mlp_backprop_error(10, 0.1);
        pass &= mlp <= 1e-4;
        parts.push(format!("mlp backprop {mlp:.1e}"));
        (pass, parts.join(", "))
    }));

    lines.push(run("multi-directional rendering", None, || {
        let r = multicbf();
        let smallest = r.local_violations.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = r.global_force / smallest;
        (
            r.active_actuators >= 2 && ratio < 0.1,
            format!(
                "{} active actuators, local violations {:?}, global force {:.3} ({:.0}% of the smaller local violation)",
                r.active_actuators,
                r.local_violations.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
                r.global_force,
                100.0 * ratio
            ),
        )
    }));

    lines.push(run("direction-set resolution", None, || {
        let deg = min_canonical_angle_deg();
        (deg >= 28.0, format!("minimum pairwise angle {deg:.2} deg"))
    }));

    lines.push(run("behavioral direction", Some(Duration::from_secs(600)), || {
        let r = behavior(100);
        let (na_c, vsc_c, na_d, vsc_d) = r.totals();
        let fwd = r.na_collisions(Direction::Forward);
        let pass = r.failed == 0
            && vsc_c < na_c
            && vsc_d < na_d
            && r.na_collisions(Direction::Right) > fwd
            && r.na_collisions(Direction::Upward) > fwd;
        let per_dir: Vec<String> = r
            .rows
            .iter()
            .map(|(d, nc, vc, nd, vd)| format!("{d}: NA {nc}/{nd:.0} VSC {vc}/{vd:.0}"))
            .collect();
        (
            pass,
            format!(
                "{} seeds, collisions NA {na_c} VSC {vsc_c}, disagreement NA {na_d:.1} VSC {vsc_d:.1} [{}], {} failed trials",
                r.seeds,
                per_dir.join("; "),
                r.failed
            ),
        )
    }));

    lines.push(run("layout recovery", None, || {
        let r = layout_recovery();
        let (tv0, tv1) = smoothness_by_lambda();
        (
            r.within_2cm * 10 >= 32 * 9 && tv1 <= tv0,
            format!(
                "{}/32 directions within 2 cm (worst {:.1} mm), grid TV lambda=0 {tv0:.3} vs lambda=0.1 {tv1:.3}",
                r.within_2cm,
                r.worst_error * 1e3
            ),
        )
    }));

    let mut failed = 0;
    for l in &lines {
        println!(
            "{} {} ({:.2?}): {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.elapsed,
            l.detail
        );
        failed += usize::from(!l.pass);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vibroshield"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn protocol_round_trip_through_hex() {
    let hex = run_ok(&["protocol", "encode", "--address", "3", "--intensity", "9", "--frequency", "3"]);
    assert_eq!(hex.trim(), "07 96");
    let decoded: serde_json::Value = serde_json::from_str(&run_ok(&["protocol", "decode", "07 96"])).unwrap();
    assert_eq!(decoded["address"], 3);
    assert_eq!(decoded["intensity_level"], 9);
    let out = bin().args(["protocol", "decode", "07 97"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn simulate_replay_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let first_out = dir.path().join("first.json");
    run_ok(&[
        "simulate", "--direction", "right", "--mode", "vsc", "--pilot", "noisy", "--seed", "5",
        "--trace", trace.to_str().unwrap(), "--out", first_out.to_str().unwrap(),
    ]);
    let replayed = run_ok(&["simulate", "--direction", "right", "--mode", "vsc", "--seed", "5", "--replay", trace.to_str().unwrap()]);
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&first_out).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&replayed).unwrap();
    for key in ["total_distance", "collisions", "input_disagreement", "ticks", "outcome"] {
        assert_eq!(a[key], b[key], "{key}");
    }
}

#[test]
fn batch_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("batch.toml");
    std::fs::write(&cfg, "seeds = [0, 1]\nmodes = [\"na\", \"vsc\"]\ndirections = [\"forward\"]\n").unwrap();
    run_ok(&["batch", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    let trials = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
}

#[test]
fn default_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.toml");
    std::fs::write(&path, run_ok(&["config"])).unwrap();
    run_ok(&["simulate", "--config", path.to_str().unwrap(), "--seed", "1"]);
    std::fs::write(&path, "dt = -1.0\n").unwrap();
    let out = bin().args(["simulate", "--config", path.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn layout_sample_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let layout = dir.path().join("layout.csv");
    run_ok(&["layout", "sample", "--participants", "1", "--actuators", "20", "--reps", "2", "--out", data.to_str().unwrap()]);
    run_ok(&["layout", "fit", "--data", data.to_str().unwrap(), "--out", layout.to_str().unwrap(), "--epochs", "5"]);
    let text = std::fs::read_to_string(&layout).unwrap();
    assert_eq!(text.lines().count(), 33);
}

use std::path::Path;
use std::process::{Command, Output};

use adapt::formats::write_mask_png;
use adapt_core::analytics::SegMask;
use serde_json::Value;

fn adapt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adapt")).args(args).env_remove("ADAPT_DATA_DIR").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_calibrate_and_replay_the_recording() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let cfg = tmp.path().join("small.json");
    std::fs::write(&cfg, r#"{ "mission_id": "cli-1", "plan": { "area_m": [60, 60], "camera_time_offset_s": 0.05 } }"#).unwrap();
    let summary = json(&adapt(&["--json", "simulate", "--config", s(&cfg), "--data-dir", s(&data)]));
    assert_eq!(summary["mission_id"], "cli-1");
    assert_eq!(summary["analytics_delivered"], summary["analytics_emitted"]);

    let sim = data.join("missions/cli-1/sim");
    let cal = tmp.path().join("cal.json");
    let result = json(&adapt(&[
        "--json",
        "calibrate",
        "--sfm",
        s(&sim.join("sfm.txt")),
        "--times",
        s(&sim.join("images.csv")),
        "--ins",
        s(&sim.join("ins.csv")),
        "--out",
        s(&cal),
    ]));
    let offset = result["time_offset_s"].as_f64().unwrap();
    // Camera stamps run 50 ms late, so INS time = image time - 0.05.
    assert!((offset + 0.05).abs() < 0.01, "{offset}");
    assert!(cal.exists());

    let report = json(&adapt(&["--json", "replay", s(&sim.join("downlink.cap")), "--data-dir", s(&data), "--mission-id", "again"]));
    assert_eq!(report["store_digest"], summary["store_digest"]);
    assert_eq!(report["analytics_held"], 0);

    // Neither a flown nor a replayed mission can be written twice.
    let again = adapt(&["replay", s(&sim.join("downlink.cap")), "--data-dir", s(&data), "--mission-id", "again"]);
    assert_eq!(again.status.code(), Some(2));
    let again = adapt(&["simulate", "--config", s(&cfg), "--data-dir", s(&data)]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn vectorize_reports_budgeted_size() {
    let tmp = tempfile::tempdir().unwrap();
    let mut mask = SegMask::filled(256, 256, 0);
    for y in 40..200 {
        for x in 30..(60 + y) {
            mask.set(x, y, 1);
        }
    }
    let png = tmp.path().join("mask.png");
    let mut buf = Vec::new();
    write_mask_png(&mut buf, &mask).unwrap();
    std::fs::write(&png, buf).unwrap();
    let polys = tmp.path().join("polys.json");
    let out = json(&adapt(&["--json", "vectorize", s(&png), "--budget", "2048", "--out", s(&polys)]));
    assert_eq!(out["width"], 256);
    assert!(out["encoded_bytes"].as_u64().unwrap() <= 2048);
    assert!(out["min_iou"].as_f64().unwrap() > 0.99);
    let written: Value = serde_json::from_slice(&std::fs::read(&polys).unwrap()).unwrap();
    assert_eq!(written[0]["class_id"], 1);
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{ "budget": 1 }"#).unwrap();
    assert_eq!(adapt(&["simulate", "--config", s(&bad), "--data-dir", s(tmp.path())]).status.code(), Some(2));
    std::fs::write(&bad, r#"{ "telemetry_hz": 0 }"#).unwrap();
    assert_eq!(adapt(&["simulate", "--config", s(&bad), "--data-dir", s(tmp.path())]).status.code(), Some(2));
    assert_eq!(adapt(&["vectorize", s(&tmp.path().join("missing.png"))]).status.code(), Some(3));
    std::fs::write(&bad, b"not a png").unwrap();
    assert_eq!(adapt(&["vectorize", s(&bad)]).status.code(), Some(3));
    assert_eq!(adapt(&["calibrate", "--sfm", s(&bad), "--times", s(&bad), "--ins", s(&bad)]).status.code(), Some(3));
    assert_eq!(adapt(&["frobnicate"]).status.code(), Some(2));
}

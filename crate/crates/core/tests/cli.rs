use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use roadlmb::RoadMap;

fn track(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_track"))
        .args(args)
        .env_remove("TRACK_CONFIG")
        .output()
        .expect("binary runs")
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn scenario_list_names_every_scenario() {
    let out = track(&["scenario", "list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in roadlmb::sim::scenario_names() {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn runs_are_reproducible_and_write_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = track(&[
            "run",
            "--scenario",
            "s-curve",
            "--variants",
            "baseline,interacting",
            "--mc",
            "2",
            "--seed",
            "7",
            "--output",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let files = read_dir_bytes(&a);
    assert_eq!(files, read_dir_bytes(&b));
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "comparison.md",
        "comparison.json",
        "report_baseline.json",
        "report_interacting.json",
        "replicate_000/truth.csv",
        "replicate_000/scans.csv",
        "replicate_001/tracks_interacting.csv",
        "replicate_001/errors_baseline.csv",
    ] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
    let errors = fs::read_to_string(a.join("replicate_000/errors_interacting.csv")).unwrap();
    assert!(errors.starts_with("step,matched,err_x,err_y,err_v,err_phi,err_omega,label_error,ospa\n"));

    let diff = track(&[
        "report",
        "diff",
        a.join("report_interacting.json").to_str().unwrap(),
        a.join("report_baseline.json").to_str().unwrap(),
    ]);
    assert!(diff.status.success());
    let table = fs::read_to_string(a.join("comparison.md")).unwrap();
    assert_eq!(String::from_utf8(diff.stdout).unwrap().trim_end(), table.trim_end());
}

#[test]
fn dotted_overrides_and_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, r#"{"scenario": {"name": "long-right-turn"}, "replicate_logs": false}"#).unwrap();
    let out_dir = tmp.path().join("out");
    let out = track(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--variants=map-only,baseline",
        "--output",
        out_dir.to_str().unwrap(),
        "--filter.survival_prob=0.95",
        "--scenario.params.duration=5.0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("report_map-only.json").exists());
    assert!(!out_dir.join("replicate_000").exists());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("report_baseline.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "long-right-turn");
    assert_eq!(report["replicates"][0]["label_error_series"].as_array().unwrap().len(), 51);
}

#[test]
fn exit_codes_classify_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let bad_value = track(&["run", "--output", out, "--filter.survival_prob=2"]);
    assert_eq!(bad_value.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_value.stderr).contains("survival_prob"));

    let bad_variant = track(&["run", "--output", out, "--variants", "fastest"]);
    assert_eq!(bad_variant.status.code(), Some(2));

    let unknown = track(&["run", "--output", out, "--scenario", "moon-base"]);
    assert_eq!(unknown.status.code(), Some(3));

    let scenario = tmp.path().join("scenario.json");
    let mut sc = serde_json::to_value(roadlmb::sim::build_scenario("s-curve", &Default::default()).unwrap()).unwrap();
    sc["duration"] = serde_json::json!(-1.0);
    fs::write(&scenario, sc.to_string()).unwrap();
    let invalid = track(&["run", "--output", out, "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(invalid.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("duration"));
}

#[test]
fn map_build_fits_rectangles() {
    let doc = concat!(env!("CARGO_MANIFEST_DIR"), "/data/t-junction.json");
    let out = track(&["map", "build", doc]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map: RoadMap = serde_json::from_slice(&out.stdout).unwrap();
    assert!(map.len() > 4);
    assert_eq!(map.get(1000).unwrap().successors, vec![2000, 3000]);

    let missing = track(&["map", "build", "/nonexistent/map.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

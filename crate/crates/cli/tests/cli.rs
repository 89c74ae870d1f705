use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn explore(world: &Path, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_explore"))
        .arg("--world")
        .arg(world)
        .arg("--config")
        .arg(config)
        .args(["--seed", "7", "--out"])
        .arg(out)
        .args(extra)
        .output()
        .expect("explore runs")
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn corridor_mission_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = explore(
        &root().join("worlds/corridor.json"),
        &root().join("configs/aerial.toml"),
        &out,
        &["--export-map", "--export-graph"],
    );
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert!(lines.next().unwrap().starts_with("tick,t,x,y,z"));
    assert!(lines.count() > 10);

    let events = fs::read_to_string(out.join("events.jsonl")).unwrap();
    let parsed: Vec<serde_json::Value> = events.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed[0]["event"], "mission_started");
    assert_eq!(parsed.last().unwrap()["to"], "terminated");
    assert!(out.join("reports.jsonl").exists());

    let s = summary(&out);
    assert_eq!(s["outcome"], "completed");
    assert_eq!(s["return_home"], true);
    assert!(s["explored_fraction"].as_f64().unwrap() > 0.95);

    assert!(fs::metadata(out.join("map.txt")).unwrap().len() > 0);
    let graph: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("global_graph.json")).unwrap()).unwrap();
    assert!(graph.is_object());
}

#[test]
fn tick_cap_stops_early_without_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = explore(&root().join("worlds/corridor.json"), &root().join("configs/aerial.toml"), dir.path(), &["--ticks-max", "20"]);
    assert!(res.status.success());
    let s = summary(dir.path());
    assert_eq!(s["outcome"], "tick_limit");
    assert!(s["ticks"].as_u64().unwrap() <= 20);
    assert!(!dir.path().join("map.txt").exists());
}

#[test]
fn aborted_mission_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // Two sealed rooms: home is in the other one.
    let world = dir.path().join("split.json");
    fs::write(
        &world,
        r#"{
  "bounds": {"min": [0, 0, 0], "max": [20, 6, 5]},
  "free_boxes": [
    {"min": [1, 1, 1], "max": [9, 5, 4]},
    {"min": [11, 1, 1], "max": [19, 5, 4]}
  ],
  "non_traversable": [],
  "artifacts": [],
  "start": {"position": [3, 3, 2.5], "heading": 0.0},
  "home": [15, 3, 2.5]
}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let res = explore(&world, &root().join("configs/aerial.toml"), &out, &[]);
    assert!(!res.status.success());
    assert_eq!(summary(&out)["outcome"], "aborted");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[robot]\nv_ref = 1.0\ntop_speed = 3.0\n").unwrap();
    let out = dir.path().join("run");
    let res = explore(&root().join("worlds/corridor.json"), &config, &out, &[]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("top_speed"), "stderr: {stderr}");
    assert!(!out.join("summary.json").exists());
}

#[test]
fn same_seed_gives_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let world = root().join("worlds/t_junction.json");
    let config = root().join("configs/aerial.toml");
    for out in [&a, &b] {
        assert!(explore(&world, &config, out, &["--ticks-max", "300"]).status.success());
    }
    for file in ["metrics.csv", "events.jsonl", "reports.jsonl"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }
}

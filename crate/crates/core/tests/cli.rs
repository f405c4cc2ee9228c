use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn memcap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memcap")).args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

const TWO_TAP: &str = r#"{
  "channel": { "taps": [ { "delay": 0, "matrix": [[1.0]] }, { "delay": 1, "matrix": [[0.5]] } ] },
  "noise": { "taps": [ { "lag": 0, "matrix": [[1.0]] } ] },
  "constraints": { "tpc": 1.0 },
  "grid": { "N": 4096 }
}"#;

#[test]
fn capacity_in_nats_and_bits() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", TWO_TAP);
    let out = memcap(dir.path(), &["capacity", "--spec", &spec, "--oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let nats = json(dir.path(), "capacity.json")["capacity"].as_f64().unwrap();
    assert!((nats - 0.4134271524473517).abs() <= 1e-6 * nats);

    let oracle = fs::read_to_string(dir.path().join("oracle.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(oracle.lines().next().unwrap()).unwrap();
    assert_eq!(line["pass"], true);

    let psd = fs::read_to_string(dir.path().join("psd.csv")).unwrap();
    assert!(psd.starts_with('#'));
    assert!(psd.contains("config_hash"));

    let out = memcap(dir.path(), &["capacity", "--spec", &spec, "--log", "bits"]);
    assert_eq!(out.status.code(), Some(0));
    let bits = json(dir.path(), "capacity.json")["capacity"].as_f64().unwrap();
    assert!((bits * std::f64::consts::LN_2 - nats).abs() <= 1e-12);
}

#[test]
fn same_spec_same_hash() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", TWO_TAP);
    memcap(dir.path(), &["check", "--spec", &spec]);
    let a = json(dir.path(), "admissibility.json")["header"]["config_hash"].clone();
    // Same values, different layout.
    let spec2 = write(dir.path(), "spec2.json", &TWO_TAP.replace("\n", " ").replace("1.0", "1"));
    memcap(dir.path(), &["check", "--spec", &spec2]);
    let b = json(dir.path(), "admissibility.json")["header"]["config_hash"].clone();
    assert_eq!(a, b);
    assert!(a.as_str().unwrap().len() == 64);
}

#[test]
fn singular_noise_at_band_edge_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{ "channel": { "taps": [ { "delay": 0, "matrix": [[1.0]] } ] },
             "noise": { "taps": [ { "lag": 0, "matrix": [[1.0]] }, { "lag": 1, "matrix": [[0.5]] } ] },
             "constraints": { "tpc": 1.0 } }"#,
    );
    let out = memcap(dir.path(), &["capacity", "--spec", &spec, "--grid", "64"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pi"));
    assert!(!dir.path().join("capacity.json").exists());
}

#[test]
fn schema_errors_exit_three_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", &TWO_TAP.replace("\"tpc\"", "\"tcp\""));
    let out = memcap(dir.path(), &["capacity", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let spec = write(dir.path(), "neg.json", &TWO_TAP.replace("\"delay\": 1", "\"delay\": -1"));
    let out = memcap(dir.path(), &["capacity", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel.taps[1].delay"));
}

#[test]
fn unattainable_harvest_floor_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{ "channel": { "taps": [ { "delay": 0, "matrix": [[1.0]] } ] },
             "noise": { "taps": [ { "lag": 0, "matrix": [[1.0]] } ] },
             "constraints": { "tpc": 1.0, "ehc": [ { "taps": [ { "delay": 0, "matrix": [[1.0]] } ], "floor": 2.0 } ] },
             "grid": { "N": 16 } }"#,
    );
    let out = memcap(dir.path(), &["joint", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(dir.path(), "capacity.json")["status"], "infeasible");
}

#[test]
fn joint_per_antenna_with_grid_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{ "n_tx": 2, "n_rx": 1,
             "channel": { "taps": [ { "delay": 0, "matrix": [[1.0, 1.0]] } ] },
             "noise": { "taps": [ { "lag": 0, "matrix": [[1.0]] } ] },
             "constraints": { "pac": [1.0, 1.0] },
             "grid": { "N": 2 } }"#,
    );
    let out = memcap(dir.path(), &["joint", "--spec", &spec, "--oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(dir.path(), "capacity.json");
    assert_eq!(doc["status"], "optimal");
    assert!((doc["capacity"].as_f64().unwrap() - 0.5 * 5f64.ln()).abs() < 1e-8);
    let oracle = fs::read_to_string(dir.path().join("oracle.jsonl")).unwrap();
    assert!(oracle.contains("\"pass\":true"), "{oracle}");
}

#[test]
fn sweep_and_converge_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.json", TWO_TAP);
    let out = memcap(dir.path(), &["sweep", "--spec", &spec, "--grid", "512"]);
    assert_eq!(out.status.code(), Some(0));
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "P,capacity,mu,active_fraction");
    assert_eq!(rows.len(), 6);

    let out = memcap(dir.path(), &["converge", "--spec", &spec, "--grids", "8,16,32"]);
    assert_eq!(out.status.code(), Some(0));
    let conv = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    let rows: Vec<&str> = conv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].ends_with(','));
}

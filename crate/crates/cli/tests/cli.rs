//! End-to-end behaviour of the `cpk` binary: exit codes, outputs and manifests.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cpk(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpk"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("CPK_THREADS", "2")
        .output()
        .expect("spawn cpk")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_config_gives_reference_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, "{}").unwrap();
    let o = cpk(dir.path(), &["--config", cfg.to_str().unwrap(), "bounds"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = read_json(&dir.path().join("bounds.json"));
    assert!((b["p_bound"].as_f64().unwrap() - 0.73).abs() < 0.005);
    assert!((b["t2_ppm"].as_f64().unwrap() - 90.0).abs() < 1e-9);
    assert!((b["alpha_ppm"].as_f64().unwrap() - 26.0).abs() < 0.2);
}

#[test]
fn invalid_key_is_named_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"cavity": {"t2_ppm": -5}}"#).unwrap();
    let o = cpk(dir.path(), &["--config", cfg.to_str().unwrap(), "bounds"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("cavity.t2_ppm"));
    assert!(!dir.path().join("bounds.json").exists());
}

#[test]
fn parse_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"cavity\": {\"t2_ppm\": }\n}").unwrap();
    let o = cpk(dir.path(), &["--config", cfg.to_str().unwrap(), "bounds"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cpk(dir.path(), &["teleport"]).status.code(), Some(2));
    assert_eq!(cpk(dir.path(), &["tomo"]).status.code(), Some(2));
    assert_eq!(cpk(dir.path(), &["sweep-t2", "--points", "many"]).status.code(), Some(2));
    assert_eq!(cpk(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn bad_input_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    std::fs::write(&counts, "photon_basis,ion_basis,outcome,counts\nZ,Q,++,3\n").unwrap();
    let o = cpk(dir.path(), &["tomo", "--counts", counts.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_has_requested_rows_and_unit_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpk(dir.path(), &["sweep-t2", "--min-ppm", "10", "--max-ppm", "1000", "--points", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sweep_t2.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t2_ppm,"));
    assert_eq!(lines.count(), 200);
}

#[test]
fn simulate_reaches_reference_collection() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpk(dir.path(), &["simulate", "--rabi-mhz", "14", "--duration-us", "400"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("wavepacket_sim.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t_us,flux_H_per_s,flux_V_per_s,cum_P_S");
    let last: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 0.72).abs() < 0.03, "{last}");
}

#[test]
fn tags_round_trip_through_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpk(dir.path(), &["wavepacket", "--synthetic-attempts", "20000", "--write-tags"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let synthetic = read_json(&dir.path().join("efficiency.json"));
    let again = tempfile::tempdir().unwrap();
    let tags = dir.path().join("wavepacket_tags.csv");
    let o = cpk(again.path(), &["wavepacket", "--tags", tags.to_str().unwrap(), "--attempts", "20000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_file = read_json(&again.path().join("efficiency.json"));
    assert_eq!(synthetic["p_tot"], from_file["p_tot"]);
    assert!((synthetic["p_s"].as_f64().unwrap() - 0.72).abs() < 0.03);
}

#[test]
fn manifest_lists_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpk(dir.path(), &["train", "--synthetic-attempts", "2000", "--write-tags"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["started_unix"], 1700000000);
    let mut listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    listed.sort();
    assert_eq!(listed, ["train.json", "train_tags.csv"]);
    for f in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_cpk"))
            .args(["--seed", "3", "--out-dir"])
            .arg(dir.path())
            .args(["tomo", "--synthetic-events", "800", "--synthetic-noise", "0.1", "--bootstrap", "32"])
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .env("CPK_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        ["counts.csv", "tomo.json", "manifest.json"].map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn invalid_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cpk"))
        .arg("--out-dir")
        .arg(dir.path())
        .args(["tomo", "--synthetic-events", "100", "--bootstrap", "4"])
        .env("CPK_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

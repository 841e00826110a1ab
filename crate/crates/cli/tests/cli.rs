// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::{Command, Output};

fn noc3d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noc3d")).args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = noc3d(&[
        "run", "--benchmark", "uniform", "--dims", "3x3x3", "--variant", "feto", "--hard-rate", "10",
        "--packets", "100", "--seed", "3", "--output-dir", out,
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("arrival"));
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("# noc3d "));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["injected_packets"], 100);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "benchmarks = [\"uniform\"]\ndims = \"2x2x2\"\nvariants = [\"baseline\", \"feto\"]\nhard_rates = [0, 20]\nseeds = [1, 2]\ntotal_packets = 40\n").unwrap();
    let o = noc3d(&["sweep", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    // Header plus 2 variants x 2 rates x 2 seeds.
    assert_eq!(rows.len(), 1 + 8);
    assert!(rows[1..].iter().all(|r| r.contains(",ok,")));
}

#[test]
fn missing_paths_are_named() {
    let o = noc3d(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("/nonexistent/exp.toml"));

    let o = noc3d(&["run", "--benchmark", "table:/nonexistent/flows.csv", "--dims", "2x2x2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("/nonexistent/flows.csv"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(noc3d(&["run", "--seed", ""]).status.code(), Some(2));
    assert_eq!(noc3d(&["run", "--variant", "bogus"]).status.code(), Some(2));
    let o = noc3d(&["run", "--seed", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("sweep"));
}

#[test]
fn selftest_exit_codes() {
    let o = noc3d(&["selftest"]);
    assert!(o.status.success(), "{}", text(&o.stdout));
    assert!(!text(&o.stdout).contains("FAIL"));
    for hook in ["--corrupt-hmatrix", "--perturb-replay"] {
        let o = noc3d(&["selftest", hook]);
        assert_eq!(o.status.code(), Some(1), "{hook}");
        assert!(text(&o.stdout).contains("FAIL"));
    }
}

#[test]
fn dump_hmatrix_prints_six_rows() {
    let o = noc3d(&["dump-hmatrix"]);
    assert!(o.status.success());
    let s = text(&o.stdout);
    let rows: Vec<&str> = s.lines().collect();
    assert_eq!(rows.len(), 6);
}

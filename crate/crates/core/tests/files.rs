// SPDX-License-Identifier: Apache-2.0

use std::fs;

use noc3d::experiment::{write_sweep_report, ExperimentConfig};
use noc3d::fault::plan_hard_faults;
use noc3d::{Dims, Distribution, FaultPlan, NetworkConfig, TrafficKind, Variant};

#[test]
fn fault_plan_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.toml");
    let cfg = NetworkConfig::for_variant(Dims::new(3, 3, 3), Variant::Feto);
    let plan = plan_hard_faults(&cfg, 30.0, Distribution::Weighted, 4, 2).unwrap().with_soft_rate(0.1);
    plan.save(&path).unwrap();
    assert_eq!(FaultPlan::load(&path).unwrap(), plan);
}

#[test]
fn load_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let e = ExperimentConfig::load(&missing).unwrap_err().to_string();
    assert!(e.contains("absent.toml"), "{e}");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seeds = \"seven\"\n").unwrap();
    assert!(ExperimentConfig::load(&bad).is_err());
}

#[test]
fn sweep_report_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        benchmarks: vec![TrafficKind::Uniform, TrafficKind::Transpose],
        dims: Some(Dims::new(2, 2, 2)),
        variants: vec![Variant::Baseline, Variant::Feto],
        hard_rates: vec![0.0, 25.0],
        seeds: vec![1, 2],
        total_packets: Some(24),
        output_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let results = cfg.sweep();
    assert_eq!(results.len(), 16);
    write_sweep_report(&cfg, &results).unwrap();
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(body.len(), 16);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 16);
}

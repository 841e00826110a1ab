// SPDX-License-Identifier: Apache-2.0
//! Experiment configuration, fault-rate sweeps, MTTF tables and report files.
//!
//! A config is a TOML document; every key is optional:
//!
//! ```toml
//! benchmarks = ["uniform"]          # run uses the first; "table:<path>" for CSV tables
//! dims = "4x4x4"                    # omit to use each benchmark's own mesh
//! variants = ["feto"]               # baseline | 3d-fto | set | feto
//! hard_rates = [0.0]                # percent of routers with a hard fault
//! soft_rates = [0.0]                # percent: upsets per 100 cycles, network-wide
//! seeds = [1]
//! distribution = "datapath"         # flat | weighted | datapath
//! max_fault_width = 2
//! total_packets = 8192              # omit for the benchmark default
//! packet_length = 10
//! injection_interval = 100
//! output_dir = "out"
//!
//! [network]                         # NetworkConfig; variant flags are overwritten
//! buffer_depth = 4
//!
//! [mttf]
//! n = 1000
//! seed = 1
//! lambda_raw = 1.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, MetricsReport};
use crate::fault::{plan_hard_faults, Distribution};
use crate::mttf::{run_campaign, FaultType, MttfCampaign, MttfSummary, SystemVariant};
use crate::traffic::{TrafficKind, TrafficSource};
use crate::{Dims, Error, NetworkConfig, Result, Variant};

pub const VERSION: &str = concat!("noc3d ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MttfSettings {
    pub n: usize,
    pub seed: u64,
    pub dims: Dims,
    pub max_faults: u64,
    pub max_fault_width: usize,
    pub probe_length: usize,
    /// Raw fault rate, informational.
    pub lambda_raw: f64,
}

impl Default for MttfSettings {
    fn default() -> Self {
        let c = MttfCampaign::default();
        MttfSettings {
            n: c.n,
            seed: c.seed,
            dims: c.dims,
            max_faults: c.max_faults,
            max_fault_width: c.max_fault_width,
            probe_length: c.probe_length,
            lambda_raw: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmarks: Vec<TrafficKind>,
    pub dims: Option<Dims>,
    pub variants: Vec<Variant>,
    pub hard_rates: Vec<f64>,
    pub soft_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub distribution: Distribution,
    pub max_fault_width: usize,
    pub total_packets: Option<usize>,
    pub packet_length: usize,
    pub injection_interval: u64,
    pub output_dir: PathBuf,
    pub network: NetworkConfig,
    pub mttf: MttfSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrafficSource::default();
        ExperimentConfig {
            benchmarks: vec![TrafficKind::Uniform],
            dims: None,
            variants: vec![Variant::Feto],
            hard_rates: vec![0.0],
            soft_rates: vec![0.0],
            seeds: vec![1],
            distribution: Distribution::Datapath,
            max_fault_width: 2,
            total_packets: None,
            packet_length: t.packet_length,
            injection_interval: t.injection_interval,
            output_dir: PathBuf::from("."),
            network: NetworkConfig::default(),
            mttf: MttfSettings::default(),
        }
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub benchmark: TrafficKind,
    pub dims: Dims,
    pub variant: Variant,
    pub hard_rate: f64,
    pub soft_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: std::result::Result<MetricsReport, String>,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse { what: "experiment config".into(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse { what: path.display().to_string(), msg },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("benchmarks", self.benchmarks.is_empty()),
            ("variants", self.variants.is_empty()),
            ("hard_rates", self.hard_rates.is_empty()),
            ("soft_rates", self.soft_rates.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(Error::Config(format!("{name} must not be empty")));
        }
        if let Some(r) = self.hard_rates.iter().find(|r| !(0.0..=100.0).contains(*r)) {
            return Err(Error::Config(format!("hard_rates: {r} outside [0, 100]")));
        }
        if let Some(r) = self.soft_rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Config(format!("soft_rates: {r} must be >= 0")));
        }
        if self.packet_length == 0 || self.injection_interval == 0 || self.max_fault_width == 0 {
            return Err(Error::Config("packet_length, injection_interval and max_fault_width must be >= 1".into()));
        }
        if let Some(d) = self.dims {
            d.validate()?;
        }
        if self.benchmarks.iter().any(|b| b.default_dims().is_none()) && self.dims.is_none() {
            return Err(Error::Config("dims is required for table benchmarks".into()));
        }
        self.network.clone().with_dims(self.dims.unwrap_or(self.network.dims)).validate()?;
        self.mttf_campaign(FaultType::Hard, Distribution::Flat, SystemVariant::Baseline).validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut v = Vec::new();
        for b in &self.benchmarks {
            let dims = self.dims.or_else(|| b.default_dims()).unwrap_or(self.network.dims);
            for &hard_rate in &self.hard_rates {
                for &soft_rate in &self.soft_rates {
                    for &variant in &self.variants {
                        for &seed in &self.seeds {
                            v.push(Cell { benchmark: b.clone(), dims, variant, hard_rate, soft_rate, seed });
                        }
                    }
                }
            }
        }
        v
    }

    pub fn network_for(&self, cell: &Cell) -> NetworkConfig {
        self.network.clone().with_dims(cell.dims).with_variant(cell.variant).with_seed(cell.seed)
    }

    pub fn traffic_for(&self, cell: &Cell) -> TrafficSource {
        TrafficSource {
            total_packets: self.total_packets,
            packet_length: self.packet_length,
            injection_interval: self.injection_interval,
            ..TrafficSource::new(cell.benchmark.clone(), cell.seed)
        }
    }

    pub fn run_cell(&self, cell: &Cell) -> Result<MetricsReport> {
        let cfg = self.network_for(cell);
        cfg.validate()?;
        let plan = plan_hard_faults(&cfg, cell.hard_rate, self.distribution, cell.seed, self.max_fault_width)?
            .with_soft_rate(cell.soft_rate / 100.0);
        run(&cfg, &plan, &self.traffic_for(cell))
    }

    /// Every cell in parallel; a failing cell does not stop the others.
    pub fn sweep(&self) -> Vec<CellResult> {
        self.cells()
            .into_par_iter()
            .map(|cell| {
                let outcome = self.run_cell(&cell).map_err(|e| e.to_string());
                CellResult { cell, outcome }
            })
            .collect()
    }

    pub fn mttf_campaign(&self, fault_type: FaultType, distribution: Distribution, v: SystemVariant) -> MttfCampaign {
        let m = &self.mttf;
        MttfCampaign {
            n: m.n,
            fault_type,
            distribution,
            system_variant: v,
            seed: m.seed,
            dims: m.dims,
            max_faults: m.max_faults,
            max_fault_width: m.max_fault_width,
            probe_length: m.probe_length,
        }
    }

    /// The four (fault type x distribution) cells for both systems.
    pub fn mttf_table(&self) -> Vec<MttfRow> {
        let mut cells = Vec::new();
        for ft in [FaultType::Hard, FaultType::Soft] {
            for d in [Distribution::Flat, Distribution::Weighted] {
                cells.push((ft, d));
            }
        }
        cells
            .into_iter()
            .map(|(ft, d)| {
                let side = |v| {
                    run_campaign(&self.mttf_campaign(ft, d, v))
                        .map(|f| MttfSummary::from_faults(f, self.mttf.lambda_raw))
                        .map_err(|e| e.to_string())
                };
                let baseline = side(SystemVariant::Baseline);
                let sher3dr = side(SystemVariant::Sher3dr);
                MttfRow { fault_type: ft, distribution: d, baseline, sher3dr }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MttfRow {
    pub fault_type: FaultType,
    pub distribution: Distribution,
    pub baseline: std::result::Result<MttfSummary<f64>, String>,
    pub sher3dr: std::result::Result<MttfSummary<f64>, String>,
}

impl MttfRow {
    pub fn improvement(&self) -> Option<f64> {
        match (&self.sher3dr, &self.baseline) {
            (Ok(ft), Ok(orig)) => Some(ft.improvement(orig)),
            _ => None,
        }
    }
}

// ---- report files -----------------------------------------------------------

/// `# `-prefixed provenance lines: version and the resolved config.
pub fn provenance_header(cfg: &ExperimentConfig) -> String {
    let mut s = format!("# {VERSION}\n");
    for line in cfg.to_toml().lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s
}

fn provenance_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({ "version": VERSION, "config": cfg })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `run.csv` and `run.json` for a single run.
pub fn write_run_report(cfg: &ExperimentConfig, cell: &Cell, r: &MetricsReport) -> Result<Vec<PathBuf>> {
    let csv = cfg.output_dir.join("run.csv");
    let json = cfg.output_dir.join("run.json");
    write(&csv, &format!("{}{}\n{}\n", provenance_header(cfg), MetricsReport::csv_header(), r.csv_row()))?;
    let doc = serde_json::json!({ "provenance": provenance_json(cfg), "cell": cell, "report": r });
    write(&json, &serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok(vec![csv, json])
}

pub const SWEEP_KEY_COLUMNS: [&str; 7] = ["benchmark", "dims", "variant", "hard_rate", "soft_rate", "seed", "status"];

pub fn sweep_csv(cfg: &ExperimentConfig, results: &[CellResult]) -> String {
    let mut s = provenance_header(cfg);
    s.push_str(&SWEEP_KEY_COLUMNS.join(","));
    s.push(',');
    s.push_str(&MetricsReport::csv_header());
    s.push('\n');
    for r in results {
        let c = &r.cell;
        let key = format!("{},{},{},{},{},{}", c.benchmark.name(), c.dims, c.variant, c.hard_rate, c.soft_rate, c.seed);
        match &r.outcome {
            Ok(m) => s.push_str(&format!("{key},ok,{}\n", m.csv_row())),
            Err(e) => {
                let blanks = ",".repeat(MetricsReport::CSV_COLUMNS.len() - 1);
                s.push_str(&format!("{key},error: {},{blanks}\n", e.replace([',', '"', '\n'], " ")));
            }
        }
    }
    s
}

/// `sweep.csv` and `sweep.json`.
pub fn write_sweep_report(cfg: &ExperimentConfig, results: &[CellResult]) -> Result<Vec<PathBuf>> {
    let csv = cfg.output_dir.join("sweep.csv");
    let json = cfg.output_dir.join("sweep.json");
    write(&csv, &sweep_csv(cfg, results))?;
    let doc = serde_json::json!({ "provenance": provenance_json(cfg), "cells": results });
    write(&json, &serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok(vec![csv, json])
}

pub fn mttf_table_text(rows: &[MttfRow]) -> String {
    let fmt = |r: &std::result::Result<MttfSummary<f64>, String>| match r {
        Ok(s) => format!("{:.3}", s.aftf),
        Err(_) => "capped".to_string(),
    };
    let mut s = format!("{:<6} {:<9} {:>10} {:>10} {:>12}\n", "fault", "dist", "baseline", "sher3dr", "improvement");
    for r in rows {
        let imp = r.improvement().map_or("-".to_string(), |v| format!("{v:.3}"));
        s.push_str(&format!(
            "{:<6} {:<9} {:>10} {:>10} {:>12}\n",
            r.fault_type.name(),
            r.distribution.name(),
            fmt(&r.baseline),
            fmt(&r.sher3dr),
            imp
        ));
    }
    s
}

/// `mttf.csv` (one row per experiment) and `mttf.json` (summary table).
pub fn write_mttf_report(cfg: &ExperimentConfig, rows: &[MttfRow]) -> Result<Vec<PathBuf>> {
    let csv = cfg.output_dir.join("mttf.csv");
    let json = cfg.output_dir.join("mttf.json");
    let mut s = provenance_header(cfg);
    s.push_str("fault_type,distribution,system,experiment_index,faults_to_failure\n");
    for r in rows {
        for (name, side) in [("baseline", &r.baseline), ("sher3dr", &r.sher3dr)] {
            if let Ok(sum) = side {
                for (i, f) in sum.faults_to_failure.iter().enumerate() {
                    s.push_str(&format!("{},{},{name},{i},{f}\n", r.fault_type.name(), r.distribution.name()));
                }
            }
        }
    }
    write(&csv, &s)?;
    let table: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let side = |x: &std::result::Result<MttfSummary<f64>, String>| match x {
                Ok(s) => serde_json::json!({
                    "n": s.n, "aftf": s.aftf, "lambda_raw": s.lambda_raw,
                    "mttf_raw": s.mttf_raw, "mttf_system": s.mttf_system,
                }),
                Err(e) => serde_json::json!({ "error": e }),
            };
            serde_json::json!({
                "fault_type": r.fault_type,
                "distribution": r.distribution,
                "baseline": side(&r.baseline),
                "sher3dr": side(&r.sher3dr),
                "improvement": r.improvement(),
            })
        })
        .collect();
    let doc = serde_json::json!({ "provenance": provenance_json(cfg), "table": table });
    write(&json, &serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok(vec![csv, json])
}

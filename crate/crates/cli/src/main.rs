// SPDX-License-Identifier: Apache-2.0
//! `noc3d`: single runs, fault-rate sweeps, MTTF campaigns and self-checks.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use noc3d::codec::HMatrix;
use noc3d::experiment::{self, ExperimentConfig};
use noc3d::selftest::{self, Hooks};
use noc3d::{Dims, Distribution, RoutingAlgorithm, TrafficKind, Variant};

#[derive(Parser)]
#[command(name = "noc3d", version, about = "Fault-tolerant 3D mesh NoC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write run.csv / run.json.
    Run(Overrides),
    /// Run every benchmark x rate x variant x seed cell and write sweep.csv / sweep.json.
    Sweep(Overrides),
    /// Hard/soft x flat/weighted MTTF campaigns for both systems.
    Mttf(Overrides),
    /// Fast invariant suite; exits nonzero on any failure.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_hmatrix: bool,
        #[arg(long, hide = true)]
        perturb_replay: bool,
    },
    /// Print the SECDED parity-check matrix.
    DumpHmatrix,
}

/// Config file plus a flag for every field. Flags win over the file.
#[derive(Args, Default)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma list: uniform, transpose, hotspot10, matrix, h264, vopd, mwd, pip, table:<path>.
    #[arg(long, value_delimiter = ',')]
    benchmark: Vec<TrafficKind>,
    #[arg(long)]
    dims: Option<Dims>,
    /// Comma list: baseline, 3d-fto, set, feto.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Percent of routers with a hard fault (comma list).
    #[arg(long, value_delimiter = ',')]
    hard_rate: Vec<f64>,
    /// Soft upsets per 100 cycles, network-wide (comma list).
    #[arg(long, value_delimiter = ',')]
    soft_rate: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    distribution: Option<Distribution>,
    #[arg(long)]
    max_fault_width: Option<usize>,
    /// Total packet budget; defaults to the benchmark's own.
    #[arg(long)]
    packets: Option<usize>,
    #[arg(long)]
    packet_length: Option<usize>,
    /// Cycles between packets of one node.
    #[arg(long)]
    injection_interval: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,

    #[arg(long)]
    buffer_depth: Option<usize>,
    #[arg(long)]
    bypass_links: Option<usize>,
    #[arg(long)]
    stop_threshold: Option<usize>,
    #[arg(long)]
    go_threshold: Option<usize>,
    /// laft or xyz.
    #[arg(long)]
    routing: Option<RoutingAlgorithm>,
    #[arg(long)]
    drain_timeout: Option<u64>,
    #[arg(long)]
    blocked_timeout: Option<u64>,
    #[arg(long)]
    detour_after: Option<u64>,

    /// Experiments per MTTF campaign.
    #[arg(long)]
    mttf_n: Option<usize>,
    #[arg(long)]
    mttf_seed: Option<u64>,
    #[arg(long)]
    mttf_dims: Option<Dims>,
    #[arg(long)]
    max_faults: Option<u64>,
    #[arg(long)]
    probe_length: Option<usize>,
    #[arg(long)]
    lambda_raw: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, v: Vec<T>) {
    if !v.is_empty() {
        *slot = v;
    }
}

impl Overrides {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        set_list(&mut c.benchmarks, self.benchmark);
        if self.dims.is_some() {
            c.dims = self.dims;
        }
        set_list(&mut c.variants, self.variant);
        set_list(&mut c.hard_rates, self.hard_rate);
        set_list(&mut c.soft_rates, self.soft_rate);
        set_list(&mut c.seeds, self.seed);
        set(&mut c.distribution, self.distribution);
        set(&mut c.max_fault_width, self.max_fault_width);
        if self.packets.is_some() {
            c.total_packets = self.packets;
        }
        set(&mut c.packet_length, self.packet_length);
        set(&mut c.injection_interval, self.injection_interval);
        set(&mut c.output_dir, self.output_dir);
        let n = &mut c.network;
        set(&mut n.buffer_depth, self.buffer_depth);
        set(&mut n.bypass_links_per_router, self.bypass_links);
        set(&mut n.stop_threshold, self.stop_threshold);
        set(&mut n.go_threshold, self.go_threshold);
        set(&mut n.routing_algorithm, self.routing);
        set(&mut n.drain_timeout_cycles, self.drain_timeout);
        set(&mut n.blocked_timeout_cycles, self.blocked_timeout);
        set(&mut n.detour_after_cycles, self.detour_after);
        let m = &mut c.mttf;
        set(&mut m.n, self.mttf_n);
        set(&mut m.seed, self.mttf_seed);
        set(&mut m.dims, self.mttf_dims);
        set(&mut m.max_faults, self.max_faults);
        set(&mut m.probe_length, self.probe_length);
        set(&mut m.lambda_raw, self.lambda_raw);
        c.validate().context("invalid configuration")?;
        Ok(c)
    }
}

fn cmd_run(c: &ExperimentConfig) -> Result<()> {
    for (name, len) in [
        ("benchmark", c.benchmarks.len()),
        ("variant", c.variants.len()),
        ("hard-rate", c.hard_rates.len()),
        ("soft-rate", c.soft_rates.len()),
        ("seed", c.seeds.len()),
    ] {
        if len != 1 {
            bail!("run takes a single {name}, got {len}; use sweep for lists");
        }
    }
    let cell = c.cells().remove(0);
    let r = c.run_cell(&cell)?;
    println!(
        "{} {} {} hard={}% soft={}% seed={}: arrival {:.2}%, latency {:.2}, throughput {:.5}, lost {}",
        cell.benchmark.name(),
        cell.dims,
        cell.variant,
        cell.hard_rate,
        cell.soft_rate,
        cell.seed,
        r.arrival_rate,
        r.average_packet_latency,
        r.throughput,
        r.lost_packets
    );
    for p in experiment::write_run_report(c, &cell, &r)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_sweep(c: &ExperimentConfig) -> Result<()> {
    let results = c.sweep();
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    for r in results.iter().filter(|r| r.outcome.is_err()) {
        eprintln!("cell {:?} failed: {}", r.cell, r.outcome.as_ref().unwrap_err());
    }
    println!("{} cells, {} failed", results.len(), failed);
    for p in experiment::write_sweep_report(c, &results)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_mttf(c: &ExperimentConfig) -> Result<()> {
    let rows = c.mttf_table();
    print!("{}", experiment::mttf_table_text(&rows));
    for r in &rows {
        for side in [&r.baseline, &r.sher3dr] {
            if let Err(e) = side {
                eprintln!("{} {}: {e}", r.fault_type.name(), r.distribution.name());
            }
        }
    }
    for p in experiment::write_mttf_report(c, &rows)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_selftest(hooks: &Hooks) -> bool {
    let checks = selftest::run_selftest(hooks);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(o) => o.resolve().and_then(|c| cmd_run(&c)),
        Command::Sweep(o) => o.resolve().and_then(|c| cmd_sweep(&c)),
        Command::Mttf(o) => o.resolve().and_then(|c| cmd_mttf(&c)),
        Command::Selftest { corrupt_hmatrix, perturb_replay } => {
            let mut hooks = Hooks { perturb_replay, ..Hooks::default() };
            if corrupt_hmatrix {
                let mut cols = *hooks.h_matrix.columns();
                cols[3] = cols[4];
                hooks.h_matrix = HMatrix::from_columns(cols);
            }
            return if cmd_selftest(&hooks) { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
        Command::DumpHmatrix => {
            print!("{}", HMatrix::hsiao());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use noc3d::codec::HMatrix;
use noc3d::engine::{EngineEvent, PacketOutcome};
use noc3d::experiment::ExperimentConfig;
use noc3d::fault::{SoftEvent, SoftTarget};
use noc3d::selftest::{ddrm_trial, secded_sweep, DdrmClass};
use noc3d::{Coord3, Dims, Direction, FaultPlan, MetricsReport, Network, NetworkConfig, TrafficKind, Variant};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(limit: Duration, t: Duration) -> bool {
    t <= limit
}

/// Runs every (benchmark, variant, hard, soft, seed) cell and returns reports in cell order.
fn sweep(benchmark: TrafficKind, dims: Dims, variants: &[Variant], hard: &[f64], soft: &[f64], seeds: u64) -> Vec<MetricsReport> {
    let cfg = ExperimentConfig {
        benchmarks: vec![benchmark],
        dims: Some(dims),
        variants: variants.to_vec(),
        hard_rates: hard.to_vec(),
        soft_rates: soft.to_vec(),
        seeds: (1..=seeds).collect(),
        ..ExperimentConfig::default()
    };
    cfg.sweep().into_iter().map(|r| r.outcome.expect("cell runs")).collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c1_secded() -> Outcome {
    let t = Instant::now();
    let s = secded_sweep(&HMatrix::hsiao(), 256, 1);
    let el = t.elapsed();
    outcome(
        s.perfect() && within(Duration::from_secs(30), el),
        format!(
            "singles {}/{}, doubles {}/{} detected, {} miscorrections, {el:.2?}",
            s.singles_corrected, s.singles_total, s.doubles_detected, s.doubles_total, s.miscorrections
        ),
    )
}

fn c2_ddrm() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for class in DdrmClass::ALL {
        let good = (0..100u64).filter(|&s| ddrm_trial(class, 1000 + s).is_ok()).count();
        ok &= good == 100;
        parts.push(format!("{} {good}/100", class.name()));
    }
    let el = t.elapsed();
    outcome(ok && within(Duration::from_secs(60), el), format!("{}, {el:.2?}", parts.join(", ")))
}

fn pair(variant: Variant) -> Network {
    let cfg = NetworkConfig::for_variant(Dims::new(2, 1, 1), variant);
    let mut net = Network::new(cfg, &FaultPlan::none()).unwrap();
    net.record_events(true);
    net
}

fn one_hop(mut net: Network) -> (Network, PacketOutcome) {
    let id = net.add_packet(Coord3::new(0, 0, 0), Coord3::new(1, 0, 0), 4);
    net.run_until_idle(1_000);
    let out = net.packet_outcome(id);
    (net, out)
}

fn c3_arq() -> Outcome {
    // Second flit of a 4-flit packet crosses the A->B wire in this cycle.
    let mut cycle = None;
    for c in 0..40 {
        let mut net = pair(Variant::Feto);
        net.schedule_link_upset(c, Coord3::new(0, 0, 0), Direction::East, 0b11 << 30);
        let (net, _) = one_hop(net);
        if net.counters().retransmissions > 0 {
            cycle = Some(c);
            break;
        }
    }
    let Some(c) = cycle else { return outcome(false, "upset never hit a flit".into()) };
    let mut net = pair(Variant::Feto);
    net.schedule_link_upset(c, Coord3::new(0, 0, 0), Direction::East, 0b11 << 30);
    let (net, out) = one_hop(net);
    let retx = net.events().iter().filter(|e| matches!(e, EngineEvent::Retransmission { .. })).count();
    let ddrm = net.counters().ddrm_episodes;
    let intact = matches!(out, PacketOutcome::Delivered { .. }) && net.counters().corrupted_deliveries == 0;
    outcome(
        retx == 1 && ddrm == 0 && intact,
        format!("upset at cycle {c}: {retx} retransmission, {ddrm} DDRM episodes, delivered intact {intact}"),
    )
}

fn c4_pcr() -> Outcome {
    let (_, clean) = one_hop(pair(Variant::Feto));
    let PacketOutcome::Delivered { latency: base } = clean else { return outcome(false, format!("{clean:?}")) };
    let (mut live, mut bad) = (0, 0);
    for cycle in 0..base + 4 {
        for router in 0..2 {
            for target in [SoftTarget::NpcResult, SoftTarget::SaResult] {
                for selector in (0..2u32).flat_map(|i| (0..16u32).map(move |c| i << 16 | c)) {
                    let mut net = pair(Variant::Feto);
                    net.schedule_soft_event(SoftEvent { cycle, router, target, selector });
                    let (net, out) = one_hop(net);
                    let hit = net.events().iter().any(|e| matches!(e, EngineEvent::Soft { masked: false, .. }));
                    let want = PacketOutcome::Delivered { latency: base + u64::from(hit) };
                    live += usize::from(hit);
                    bad += usize::from(out != want);
                }
            }
        }
    }
    outcome(
        bad == 0 && live == 128,
        format!("{live} live upsets over 2 routers x NPC/SA x 2 instances x 16 corruptions, {bad} deviations"),
    )
}

fn c5_equivalence() -> Outcome {
    let dims = Dims::new(4, 4, 4);
    let r = sweep(TrafficKind::Transpose, dims, &[Variant::Baseline, Variant::Fto], &[0.0], &[0.0], 10);
    // Cells: variant outer, seed inner.
    let worst = (0..10)
        .map(|k| (r[k + 10].average_packet_latency / r[k].average_packet_latency - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 0.01, format!("max per-seed latency delta {:.3}% over 10 seeds", worst * 100.0))
}

fn c6_soft_cost() -> Outcome {
    let t = Instant::now();
    let dims = Dims::new(4, 4, 4);
    let rates = [0.0, 10.0, 20.0, 33.0];
    let base = mean(sweep(TrafficKind::Transpose, dims, &[Variant::Baseline], &[0.0], &[0.0], 10).iter().map(|r| r.average_packet_latency));
    let mut ok = true;
    let mut parts = Vec::new();
    for v in [Variant::Set, Variant::Feto] {
        let r = sweep(TrafficKind::Transpose, dims, &[v], &[0.0], &rates, 10);
        let per_rate: Vec<f64> = (0..rates.len()).map(|k| mean(r[k * 10..(k + 1) * 10].iter().map(|x| x.average_packet_latency))).collect();
        let cost = per_rate[0] / base - 1.0;
        let monotone = per_rate.windows(2).all(|w| w[1] >= w[0]);
        ok &= (0.05..=0.40).contains(&cost) && monotone;
        let lat: Vec<String> = per_rate.iter().map(|l| format!("{l:.2}")).collect();
        parts.push(format!("{v} +{:.2}% at 0%, latency [{}]", cost * 100.0, lat.join(", ")));
    }
    let el = t.elapsed();
    outcome(ok && within(Duration::from_secs(300), el), format!("baseline {base:.2}; {}; {el:.0?}", parts.join("; ")))
}

fn c7_arrival() -> Outcome {
    let t = Instant::now();
    let dims = Dims::new(5, 5, 4);
    let rates = [1.0, 5.0, 10.0, 15.0, 20.0];
    let target = [100.0, 100.0, 99.0, 99.0, 97.0];
    let r = sweep(TrafficKind::Uniform, dims, &[Variant::Feto], &rates, &[0.0], 10);
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (&rate, &want)) in rates.iter().zip(&target).enumerate() {
        // Cells: hard rate outer, seed inner.
        let got = mean(r[k * 10..(k + 1) * 10].iter().map(|x| x.arrival_rate));
        ok &= (got - want).abs() <= 4.0;
        parts.push(format!("{rate}%: {got:.2}"));
    }
    let tr = mean(sweep(TrafficKind::Transpose, dims, &[Variant::Feto], &[20.0], &[0.0], 10).iter().map(|x| x.arrival_rate));
    ok &= tr >= 94.0;
    let el = t.elapsed();
    outcome(
        ok && within(Duration::from_secs(600), el),
        format!("uniform {}; transpose 20%: {tr:.2}; {el:.0?}", parts.join(", ")),
    )
}

fn c8_throughput() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in [TrafficKind::Uniform, TrafficKind::Transpose, TrafficKind::Hotspot10, TrafficKind::Matrix] {
        let dims = b.default_dims().unwrap();
        let r = sweep(b.clone(), dims, &[Variant::Fto], &[0.0, 33.0], &[0.0], 10);
        let at = |k: usize| mean(r[k * 10..(k + 1) * 10].iter().map(|x| x.throughput));
        let kept = at(1) / at(0);
        ok &= kept >= 0.5;
        parts.push(format!("{} {:.1}%", b.name(), kept * 100.0));
    }
    outcome(ok, format!("retained throughput: {}", parts.join(", ")))
}

fn c9_mttf() -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.mttf.n, 1000);
    let rows = cfg.mttf_table();
    let mut ok = true;
    let mut imp = Vec::new();
    let mut parts = Vec::new();
    for row in &rows {
        let i = row.improvement();
        ok &= i.is_some_and(|i| i > 1.0);
        imp.push(i.unwrap_or(0.0));
        parts.push(format!("{} {} {:.2}", row.fault_type.name(), row.distribution.name(), i.unwrap_or(f64::NAN)));
    }
    // Rows: hard flat, hard weighted, soft flat, soft weighted.
    ok &= imp[1] >= imp[0] && imp[3] >= imp[2];
    let el = t.elapsed();
    outcome(ok && within(Duration::from_secs(600), el), format!("improvement {}; {el:.0?}", parts.join(", ")))
}

fn c10_determinism() -> Outcome {
    let dims = Dims::new(4, 4, 4);
    let variants = [Variant::Baseline, Variant::Fto, Variant::Set, Variant::Feto];
    let a = sweep(TrafficKind::Uniform, dims, &variants, &[0.0, 20.0], &[0.0, 20.0], 2);
    let b = sweep(TrafficKind::Uniform, dims, &variants, &[0.0, 20.0], &[0.0, 20.0], 2);
    let identical = a == b;
    let conserved = a.iter().all(|r| r.is_conserved() && r.counters.duplicate_ejections == 0);
    outcome(
        identical && conserved,
        format!("{} runs repeated: identical {identical}, conserved with no duplicates {conserved}", a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("secded-exhaustive", c1_secded),
        ("ddrm-classification", c2_ddrm),
        ("transient-arq", c3_arq),
        ("pcr-recovery", c4_pcr),
        ("fault-free-equivalence", c5_equivalence),
        ("soft-error-cost", c6_soft_cost),
        ("arrival-rate", c7_arrival),
        ("throughput-retention", c8_throughput),
        ("mttf-improvement", c9_mttf),
        ("determinism-conservation", c10_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += usize::from(!o.passed);
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Monte-Carlo mean-time-to-failure campaigns.
//!
//! An experiment injects faults one at a time into the centre router of a
//! small mesh and runs a health check after each; the count at the first
//! failed check is the experiment's faults-to-failure.

use num_traits::{FromPrimitive, Num};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Network, PacketOutcome};
use crate::error::{Error, Result};
use crate::fault::{draw_fault_at, pick_weighted, Distribution, FaultPlan, SoftEvent, SoftTarget};
use crate::model::{neighbor, Coord3, Dims, Direction, NetworkConfig, PacketId, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultType {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemVariant {
    /// No fault tolerance.
    Baseline,
    /// Full soft and hard fault tolerance.
    Sher3dr,
}

impl FaultType {
    pub fn name(self) -> &'static str {
        match self {
            FaultType::Hard => "hard",
            FaultType::Soft => "soft",
        }
    }
}

impl SystemVariant {
    pub fn variant(self) -> Variant {
        match self {
            SystemVariant::Baseline => Variant::Baseline,
            SystemVariant::Sher3dr => Variant::Feto,
        }
    }
}

impl std::str::FromStr for FaultType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(FaultType::Hard),
            "soft" => Ok(FaultType::Soft),
            _ => Err(Error::Config(format!("unknown fault type '{s}'"))),
        }
    }
}

impl std::str::FromStr for SystemVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(SystemVariant::Baseline),
            "sher3dr" | "sher-3dr" | "feto" => Ok(SystemVariant::Sher3dr),
            _ => Err(Error::Config(format!("unknown system variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MttfCampaign {
    pub n: usize,
    pub fault_type: FaultType,
    pub distribution: Distribution,
    pub system_variant: SystemVariant,
    pub seed: u64,
    pub dims: Dims,
    /// Abort an experiment that survives this many faults.
    pub max_faults: u64,
    /// Widest stuck-at fault, in bit lanes.
    pub max_fault_width: usize,
    /// Packet length of health-check probes.
    pub probe_length: usize,
}

impl Default for MttfCampaign {
    fn default() -> Self {
        MttfCampaign {
            n: 1000,
            fault_type: FaultType::Hard,
            distribution: Distribution::Flat,
            system_variant: SystemVariant::Sher3dr,
            seed: 1,
            dims: Dims::new(3, 3, 3),
            max_faults: 10_000,
            max_fault_width: 2,
            probe_length: 4,
        }
    }
}

impl MttfCampaign {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("mttf n must be >= 1".into()));
        }
        if self.probe_length == 0 || self.max_fault_width == 0 {
            return Err(Error::Config("probe_length and max_fault_width must be >= 1".into()));
        }
        self.dims.validate()
    }

    fn network_config(&self) -> NetworkConfig {
        let mut cfg = NetworkConfig::for_variant(self.dims, self.system_variant.variant());
        cfg.blocked_timeout_cycles = 400;
        cfg
    }

    /// Router the faults are injected into.
    pub fn target_router(&self) -> Coord3 {
        Coord3::new(self.dims.x / 2, self.dims.y / 2, self.dims.z / 2)
    }

    fn experiment_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
    }
}

/// Probe packets: every ordered pair of the target's neighbours, the
/// target to and from each neighbour, and every node to its mirror node.
pub fn probe_set(dims: Dims, target: Coord3) -> Vec<(Coord3, Coord3)> {
    let ns: Vec<Coord3> = Direction::MESH.iter().filter_map(|&d| neighbor(target, d, dims)).collect();
    let mut v = Vec::new();
    for &a in &ns {
        for &b in &ns {
            if a != b {
                v.push((a, b));
            }
        }
        v.push((a, target));
        v.push((target, a));
    }
    for c in dims.coords() {
        let m = Coord3::new(dims.x - 1 - c.x, dims.y - 1 - c.y, dims.z - 1 - c.z);
        if m != c {
            v.push((c, m));
        }
    }
    v
}

/// Cycles over which probes are created and recurring soft faults fire.
const PROBE_SPACING: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    Healthy,
    Failed,
}

/// One pass of the probe workload; true when every probe arrives intact.
fn probe_pass(net: &mut Network, probes: &[(Coord3, Coord3)], len: usize, soft: &[(SoftTarget, u32, u64)]) -> bool {
    let start = net.cycle();
    let target = {
        let d = net.config().dims;
        Coord3::new(d.x / 2, d.y / 2, d.z / 2)
    };
    let target_idx = net.config().dims.index_of(target);
    for &(t, selector, offset) in soft {
        net.schedule_soft_event(SoftEvent { cycle: start + 1 + offset, router: target_idx, target: t, selector });
    }
    let mut ids: Vec<PacketId> = Vec::with_capacity(probes.len());
    for &(s, d) in probes {
        ids.push(net.add_packet(s, d, len));
        for _ in 0..PROBE_SPACING {
            net.step();
        }
    }
    net.run_until_idle(20_000);
    ids.iter().all(|&p| matches!(net.packet_outcome(p), PacketOutcome::Delivered { .. }))
}

/// Exercise pass (lets online diagnosis settle), then a verification pass
/// that must deliver every probe, plus structural checks.
pub fn health_check(net: &mut Network, probe_length: usize, soft: &[(SoftTarget, u32, u64)]) -> Health {
    let dims = net.config().dims;
    let target = Coord3::new(dims.x / 2, dims.y / 2, dims.z / 2);
    if net.is_router_dead(target) {
        return Health::Failed;
    }
    let probes = probe_set(dims, target);
    if soft.is_empty() {
        probe_pass(net, &probes, probe_length, &[]);
    }
    let ok = probe_pass(net, &probes, probe_length, soft);
    let x = net.crossbar(target);
    let escalated_unmarked = Direction::ALL.iter().any(|&d| x.is_escalated(d) && !net.is_link_marked(target, d));
    if ok && net.all_ddrm_idle() && !escalated_unmarked {
        Health::Healthy
    } else {
        Health::Failed
    }
}

/// Faults injected up to and including the one that failed the system.
pub fn run_experiment(c: &MttfCampaign, index: usize) -> Result<u64> {
    let seed = c.experiment_seed(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = c.network_config();
    let mut net = Network::new(cfg.clone(), &FaultPlan::none())?;
    let target = c.target_router();
    let window = probe_set(c.dims, target).len() as u64 * PROBE_SPACING;
    let mut soft: Vec<(SoftTarget, u32)> = Vec::new();
    for k in 1..=c.max_faults {
        match c.fault_type {
            FaultType::Hard => {
                let f = draw_fault_at(&mut rng, target, &cfg, c.distribution, c.max_fault_width);
                net.add_hard_fault(f);
            }
            FaultType::Soft => match pick_weighted(&mut rng, &c.distribution.weights()) {
                0 => soft.push((SoftTarget::NpcResult, rng.gen())),
                1 => soft.push((SoftTarget::SaResult, rng.gen())),
                2 => soft.push((SoftTarget::LinkFlit, rng.gen())),
                _ => return Ok(k),
            },
        }
        let fires: Vec<(SoftTarget, u32, u64)> =
            soft.iter().map(|&(t, s)| (t, s, rng.gen_range(0..window))).collect();
        if health_check(&mut net, c.probe_length, &fires) == Health::Failed {
            return Ok(k);
        }
    }
    Err(Error::FaultCap { experiment: index, seed, cap: c.max_faults })
}

/// Aggregate of a campaign over a numeric type: `f64`, `f32` or an exact
/// rational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MttfSummary<T> {
    pub n: usize,
    pub faults_to_failure: Vec<u64>,
    /// Average faults to failure.
    pub aftf: T,
    pub lambda_raw: T,
    pub mttf_raw: T,
    pub mttf_system: T,
}

impl<T> MttfSummary<T>
where
    T: Num + FromPrimitive + Copy,
{
    pub fn from_faults(faults: Vec<u64>, lambda_raw: T) -> Self {
        assert!(!faults.is_empty(), "campaign needs at least one experiment");
        assert!(lambda_raw != T::zero(), "lambda_raw must be nonzero");
        let n = faults.len();
        let conv = |v: u64| T::from_u64(v).expect("fault count representable");
        let total = faults.iter().fold(T::zero(), |acc, &f| acc + conv(f));
        let nn = T::from_usize(n).expect("n representable");
        let mttf_raw = T::one() / lambda_raw;
        MttfSummary { n, aftf: total / nn, lambda_raw, mttf_raw, mttf_system: total * mttf_raw / nn, faults_to_failure: faults }
    }

    /// Ratio of average faults to failure, tolerant over original.
    pub fn improvement(&self, orig: &MttfSummary<T>) -> T {
        improvement(self.aftf, orig.aftf)
    }
}

pub fn improvement<T: Num + Copy>(aftf_ft: T, aftf_orig: T) -> T {
    assert!(aftf_orig != T::zero(), "original AFTF must be positive");
    aftf_ft / aftf_orig
}

/// Run all experiments of a campaign in parallel.
pub fn run_campaign(c: &MttfCampaign) -> Result<Vec<u64>> {
    c.validate()?;
    (0..c.n).into_par_iter().map(|i| run_experiment(c, i)).collect()
}

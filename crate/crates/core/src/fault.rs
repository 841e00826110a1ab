// SPDX-License-Identifier: Apache-2.0
//! Hard-fault plans and the per-cycle soft-error process.

use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{PackedFlit, CODEWORD_BITS, FLIT_BITS};
use crate::error::{Error, Result};
use crate::model::{neighbor, Coord3, Dims, Direction, NetworkConfig};

/// Structure a hard fault sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultTarget {
    BufferSlot { router: Coord3, port: Direction, slot: usize },
    CrossbarPath { router: Coord3, input: Direction, output: Direction },
    Channel { router: Coord3, direction: Direction },
    /// Router control or management logic; not recoverable.
    Controller { router: Coord3 },
}

impl FaultTarget {
    pub fn router(&self) -> Coord3 {
        match *self {
            FaultTarget::BufferSlot { router, .. }
            | FaultTarget::CrossbarPath { router, .. }
            | FaultTarget::Channel { router, .. }
            | FaultTarget::Controller { router } => router,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            FaultTarget::BufferSlot { .. } => "buffer",
            FaultTarget::CrossbarPath { .. } => "crossbar",
            FaultTarget::Channel { .. } => "channel",
            FaultTarget::Controller { .. } => "controller",
        }
    }

    /// Covered by RAB, BLoD or link marking.
    pub fn is_covered(&self) -> bool {
        !matches!(self, FaultTarget::Controller { .. })
    }
}

/// Stuck-at fault on one or more bit lanes of a 44-bit flit path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardFault {
    pub target: FaultTarget,
    /// Stuck level, 0 or 1.
    pub stuck_at: u8,
    pub bits: Vec<u8>,
    #[serde(default)]
    pub onset_cycle: u64,
}

impl HardFault {
    pub fn stuck_at_0(target: FaultTarget, bit: u8) -> Self {
        HardFault { target, stuck_at: 0, bits: vec![bit], onset_cycle: 0 }
    }

    pub fn stuck_at_1(target: FaultTarget, bit: u8) -> Self {
        HardFault { target, stuck_at: 1, bits: vec![bit], onset_cycle: 0 }
    }

    pub fn mask(&self) -> u64 {
        self.bits.iter().fold(0u64, |m, &b| m | 1 << b)
    }

    /// Force the stuck lanes. Lanes already at the stuck level are untouched.
    pub fn apply(&self, word: PackedFlit) -> PackedFlit {
        let m = self.mask();
        if self.stuck_at == 0 {
            PackedFlit(word.0 & !m)
        } else {
            PackedFlit(word.0 | m)
        }
    }

    pub fn active_at(&self, cycle: u64) -> bool {
        cycle >= self.onset_cycle
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.stuck_at > 1 {
            return bad(format!("stuck_at = {} must be 0 or 1", self.stuck_at));
        }
        if let Some(b) = self.bits.iter().find(|&&b| u32::from(b) >= FLIT_BITS) {
            return bad(format!("fault bit {b} outside [0, {FLIT_BITS})"));
        }
        let r = self.target.router();
        if !cfg.dims.contains(r) {
            return bad(format!("fault router {r} outside {}", cfg.dims));
        }
        match self.target {
            FaultTarget::BufferSlot { slot, .. } if slot >= cfg.buffer_depth => {
                bad(format!("buffer slot {slot} >= depth {}", cfg.buffer_depth))
            }
            FaultTarget::Channel { direction, .. } if neighbor(r, direction, cfg.dims).is_none() => {
                bad(format!("channel {direction} of {r} leaves the mesh"))
            }
            FaultTarget::CrossbarPath { input, output, .. } if input == output => {
                bad(format!("crossbar path {input}->{output} is a U-turn"))
            }
            _ => Ok(()),
        }
    }
}

/// Spatial distribution of hard faults over router structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Uniform over all structures, control logic included.
    Flat,
    /// Concentrated on fault-tolerance-covered structures.
    Weighted,
    /// Buffers, crossbar and channels only.
    Datapath,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Flat => "flat",
            Distribution::Weighted => "weighted",
            Distribution::Datapath => "datapath",
        }
    }

    /// Weights over (buffer slot, crossbar path, channel, controller).
    pub fn weights(self) -> [f64; 4] {
        match self {
            Distribution::Flat => [0.27, 0.27, 0.26, 0.20],
            Distribution::Weighted => [0.30, 0.30, 0.30, 0.10],
            Distribution::Datapath => [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(Distribution::Flat),
            "weighted" | "weight" => Ok(Distribution::Weighted),
            "datapath" => Ok(Distribution::Datapath),
            _ => Err(Error::Config(format!("unknown distribution '{s}'"))),
        }
    }
}

pub fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn ports_of(router: Coord3, dims: Dims) -> Vec<Direction> {
    Direction::ALL
        .into_iter()
        .filter(|&d| d.is_local() || neighbor(router, d, dims).is_some())
        .collect()
}

/// Lanes of a multi-bit fault: `width` distinct bits inside one codeword, so
/// a double-lane fault reads as a detectable double error.
pub fn draw_bits<R: Rng>(rng: &mut R, width: usize) -> Vec<u8> {
    let base = if rng.gen_bool(0.5) { 0 } else { CODEWORD_BITS as usize };
    let mut bits: Vec<u8> =
        sample(rng, CODEWORD_BITS as usize, width.min(CODEWORD_BITS as usize)).into_iter().map(|b| (base + b) as u8).collect();
    bits.sort_unstable();
    bits
}

/// Draw one hard fault located in `router`.
pub fn draw_fault_at<R: Rng>(
    rng: &mut R,
    router: Coord3,
    cfg: &NetworkConfig,
    distribution: Distribution,
    max_width: usize,
) -> HardFault {
    let ports = ports_of(router, cfg.dims);
    let mesh_ports: Vec<Direction> = ports.iter().copied().filter(|d| !d.is_local()).collect();
    let target = match pick_weighted(rng, &distribution.weights()) {
        0 => FaultTarget::BufferSlot {
            router,
            port: ports[rng.gen_range(0..ports.len())],
            slot: rng.gen_range(0..cfg.buffer_depth),
        },
        1 => {
            let input = ports[rng.gen_range(0..ports.len())];
            let outs: Vec<Direction> = ports.iter().copied().filter(|&o| o != input).collect();
            FaultTarget::CrossbarPath { router, input, output: outs[rng.gen_range(0..outs.len())] }
        }
        2 => FaultTarget::Channel { router, direction: mesh_ports[rng.gen_range(0..mesh_ports.len())] },
        _ => FaultTarget::Controller { router },
    };
    let width = rng.gen_range(1..=max_width.max(1));
    HardFault { target, stuck_at: rng.gen_range(0..=1), bits: draw_bits(rng, width), onset_cycle: 0 }
}

/// Soft-error targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoftTarget {
    NpcResult,
    SaResult,
    LinkFlit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMix {
    pub npc: f64,
    pub sa: f64,
    pub link: f64,
}

impl Default for SoftMix {
    fn default() -> Self {
        SoftMix { npc: 0.4, sa: 0.4, link: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftErrorProcess {
    /// Expected upsets per clock cycle over the whole network.
    pub rate: f64,
    #[serde(default)]
    pub target_mix: SoftMix,
    pub seed: u64,
}

impl Default for SoftErrorProcess {
    fn default() -> Self {
        SoftErrorProcess { rate: 0.0, target_mix: SoftMix::default(), seed: 0 }
    }
}

/// A single-cycle upset. `selector` picks the port, instance or bit when the
/// event is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SoftEvent {
    pub cycle: u64,
    pub router: usize,
    pub target: SoftTarget,
    pub selector: u32,
}

impl SoftErrorProcess {
    pub fn validate(&self) -> Result<()> {
        let m = self.target_mix;
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::Config(format!("soft rate {} must be >= 0", self.rate)));
        }
        let sum = m.npc + m.sa + m.link;
        if [m.npc, m.sa, m.link].iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("soft target_mix weights must be >= 0 and sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Upsets for `cycle`, a pure function of (process, cycle, node count).
///
/// Each cycle has `ceil(rate)` Bernoulli slots of probability
/// `rate / slots`. Attributes are drawn whether or not a slot fires, so
/// streams at different rates with one seed are nested.
pub fn sample_soft_errors(proc: &SoftErrorProcess, cycle: u64, nodes: usize) -> Vec<SoftEvent> {
    if proc.rate <= 0.0 {
        return Vec::new();
    }
    let slots = proc.rate.ceil().max(1.0) as usize;
    let p = proc.rate / slots as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(proc.seed ^ 0x5EF7_E770_0000_0000);
    rng.set_stream(cycle);
    let mix = [proc.target_mix.npc, proc.target_mix.sa, proc.target_mix.link];
    let mut out = Vec::new();
    for _ in 0..slots {
        let fire = rng.gen::<f64>() < p;
        let router = rng.gen_range(0..nodes);
        let target = match pick_weighted(&mut rng, &mix) {
            0 => SoftTarget::NpcResult,
            1 => SoftTarget::SaResult,
            _ => SoftTarget::LinkFlit,
        };
        let selector = rng.gen::<u32>();
        if fire {
            out.push(SoftEvent { cycle, router, target, selector });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub hard_fault_router_percentage: f64,
    pub distribution: Distribution,
    pub seed: u64,
    #[serde(default)]
    pub soft: SoftErrorProcess,
    #[serde(default)]
    pub hard: Vec<HardFault>,
}

impl Default for FaultPlan {
    fn default() -> Self {
        FaultPlan::none()
    }
}

/// Routers to fault for a percentage: `ceil(p/100 * n)`.
pub fn faulty_router_count(percentage: f64, nodes: usize) -> usize {
    ((percentage * nodes as f64) / 100.0 - 1e-9).ceil().max(0.0) as usize
}

pub fn plan_hard_faults(
    cfg: &NetworkConfig,
    percentage: f64,
    distribution: Distribution,
    seed: u64,
    max_width: usize,
) -> Result<FaultPlan> {
    if !(0.0..=100.0).contains(&percentage) {
        return Err(Error::Config(format!("hard fault percentage {percentage} outside [0, 100]")));
    }
    let n = cfg.node_count();
    let count = faulty_router_count(percentage, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4A2D_FA17_0000_0000);
    let mut routers = sample(&mut rng, n, count).into_vec();
    routers.sort_unstable();
    let hard = routers
        .into_iter()
        .map(|i| draw_fault_at(&mut rng, cfg.dims.coord_of(i), cfg, distribution, max_width))
        .collect();
    Ok(FaultPlan {
        hard_fault_router_percentage: percentage,
        distribution,
        seed,
        soft: SoftErrorProcess { seed, ..SoftErrorProcess::default() },
        hard,
    })
}

impl FaultPlan {
    pub fn none() -> Self {
        FaultPlan {
            hard_fault_router_percentage: 0.0,
            distribution: Distribution::Datapath,
            seed: 0,
            soft: SoftErrorProcess::default(),
            hard: Vec::new(),
        }
    }

    pub fn with_soft_rate(mut self, rate: f64) -> Self {
        self.soft.rate = rate;
        self
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        self.soft.validate()?;
        self.hard.iter().try_for_each(|f| f.validate(cfg))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("fault plan serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse { what: "fault plan".into(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn cfg(d: Dims) -> NetworkConfig {
        NetworkConfig::default().with_dims(d)
    }

    #[test]
    fn zero_percent_is_empty() {
        let p = plan_hard_faults(&cfg(Dims::new(4, 4, 4)), 0.0, Distribution::Flat, 3, 2).unwrap();
        assert!(p.hard.is_empty());
    }

    #[test]
    fn router_counts() {
        assert_eq!(faulty_router_count(33.0, 64), 22);
        assert_eq!(faulty_router_count(20.0, 100), 20);
        assert_eq!(faulty_router_count(10.0, 64), 7);
        let c = cfg(Dims::new(4, 4, 4));
        let p = plan_hard_faults(&c, 33.0, Distribution::Weighted, 7, 2).unwrap();
        assert_eq!(p.hard.len(), 22);
        let routers: std::collections::HashSet<_> = p.hard.iter().map(|f| f.target.router()).collect();
        assert_eq!(routers.len(), 22);
        assert_eq!(p, plan_hard_faults(&c, 33.0, Distribution::Weighted, 7, 2).unwrap());
        let p = plan_hard_faults(&cfg(Dims::new(5, 5, 4)), 20.0, Distribution::Datapath, 1, 2).unwrap();
        assert_eq!(p.hard.len(), 20);
        p.validate(&cfg(Dims::new(5, 5, 4))).unwrap();
    }

    #[test]
    fn out_of_range_percentage() {
        assert!(plan_hard_faults(&cfg(Dims::new(2, 2, 2)), 101.0, Distribution::Flat, 0, 1).is_err());
        assert!(plan_hard_faults(&cfg(Dims::new(2, 2, 2)), -1.0, Distribution::Flat, 0, 1).is_err());
    }

    #[test]
    fn stuck_at_only_changes_differing_bits() {
        let t = FaultTarget::Controller { router: Coord3::new(0, 0, 0) };
        let f = HardFault::stuck_at_0(t, 5);
        assert_eq!(f.apply(PackedFlit(0)), PackedFlit(0));
        assert_eq!(f.apply(PackedFlit(1 << 5)), PackedFlit(0));
        let f = HardFault::stuck_at_1(t, 5);
        assert_eq!(f.apply(PackedFlit(0)), PackedFlit(1 << 5));
    }

    #[test]
    fn weighted_share_covered() {
        let c = cfg(Dims::new(4, 4, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let covered = (0..1000)
            .filter(|_| draw_fault_at(&mut rng, Coord3::new(1, 1, 1), &c, Distribution::Weighted, 2).target.is_covered())
            .count();
        assert!(covered >= 800, "{covered}");
    }

    #[test]
    fn multi_bit_faults_stay_in_one_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let bits = draw_bits(&mut rng, 2);
            assert_eq!(bits.len(), 2);
            assert_eq!(u32::from(bits[0]) / CODEWORD_BITS, u32::from(bits[1]) / CODEWORD_BITS);
        }
    }

    #[test]
    fn soft_stream_rate_zero_and_replay() {
        let p = SoftErrorProcess { rate: 0.0, ..Default::default() };
        assert!((0..1000).all(|c| sample_soft_errors(&p, c, 64).is_empty()));
        let p = SoftErrorProcess { rate: 0.5, seed: 4, ..Default::default() };
        let a: Vec<_> = (0..500).flat_map(|c| sample_soft_errors(&p, c, 64)).collect();
        let b: Vec<_> = (0..500).flat_map(|c| sample_soft_errors(&p, c, 64)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn soft_streams_nest_across_rates() {
        let lo = SoftErrorProcess { rate: 0.1, seed: 9, ..Default::default() };
        let hi = SoftErrorProcess { rate: 0.33, ..lo.clone() };
        for c in 0..2000 {
            let a = sample_soft_errors(&lo, c, 27);
            let b = sample_soft_errors(&hi, c, 27);
            assert!(a.iter().all(|e| b.contains(e)));
        }
    }

    #[test]
    fn plan_toml_round_trip() {
        let c = cfg(Dims::new(3, 3, 3));
        let p = plan_hard_faults(&c, 50.0, Distribution::Flat, 5, 2).unwrap().with_soft_rate(0.2);
        assert_eq!(FaultPlan::from_toml(&p.to_toml()).unwrap(), p);
    }
}

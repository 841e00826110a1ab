// SPDX-License-Identifier: Apache-2.0
//! Fast invariant checks shared by the `selftest` command and the test suite.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Codeword22, DecodeStatus, HMatrix, CODEWORD_BITS, FLIT_BITS};
use crate::engine::{run, MetricsReport, Network};
use crate::fault::{FaultPlan, FaultTarget, HardFault};
use crate::model::neighbor;
use crate::router::BufferPosition;
use crate::routing::{laft_next_port, CongestionView, LinkFaultView};
use crate::traffic::{TrafficKind, TrafficSource};
use crate::{Coord3, Dims, Direction, NetworkConfig, Variant};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Test hooks that deliberately break a check.
#[derive(Debug, Clone)]
pub struct Hooks {
    pub h_matrix: HMatrix,
    /// Perturb one draw of the replayed run's traffic generator.
    pub perturb_replay: bool,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks { h_matrix: HMatrix::hsiao(), perturb_replay: false }
    }
}

// ---- SECDED -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SecdedStats {
    pub words: usize,
    pub singles_corrected: usize,
    pub singles_total: usize,
    pub doubles_detected: usize,
    pub doubles_total: usize,
    pub miscorrections: usize,
}

impl SecdedStats {
    pub fn perfect(&self) -> bool {
        self.singles_corrected == self.singles_total
            && self.doubles_detected == self.doubles_total
            && self.miscorrections == 0
    }
}

/// Every single and double flip of `words` random data words.
pub fn secded_sweep(h: &HMatrix, words: usize, seed: u64) -> SecdedStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SecdedStats { words, ..SecdedStats::default() };
    for _ in 0..words {
        let data: u16 = rng.gen();
        let w = h.encode(data);
        for i in 0..CODEWORD_BITS {
            s.singles_total += 1;
            let d = h.decode(w.flip(i));
            if d.status == DecodeStatus::Corrected(i as u8) && d.data == data {
                s.singles_corrected += 1;
            } else if d.status != DecodeStatus::DetectedUncorrectable {
                s.miscorrections += 1;
            }
            for j in i + 1..CODEWORD_BITS {
                s.doubles_total += 1;
                match h.decode(Codeword22(w.flip(i).flip(j).0)).status {
                    DecodeStatus::DetectedUncorrectable => s.doubles_detected += 1,
                    _ => s.miscorrections += 1,
                }
            }
        }
    }
    s
}

pub fn check_secded(h: &HMatrix) -> Check {
    let name = "secded-exhaustive";
    if let Err(e) = h.check_structure() {
        return Check { name, passed: false, detail: format!("H matrix: {e}") };
    }
    let s = secded_sweep(h, 256, 0x5EC_DED);
    Check {
        name,
        passed: s.perfect(),
        detail: format!(
            "{} words: {}/{} single corrected, {}/{} double detected, {} miscorrections",
            s.words, s.singles_corrected, s.singles_total, s.doubles_detected, s.doubles_total, s.miscorrections
        ),
    }
}

// ---- DDRM classification --------------------------------------------------------

/// One hop of a route: node, input port, output port.
pub type Hop = (Coord3, Direction, Direction);

/// Route of a lone packet in a fault-free LAFT mesh.
pub fn laft_path(dims: Dims, src: Coord3, dst: Coord3) -> Vec<Hop> {
    let mut hops = Vec::new();
    let (mut at, mut input, mut arrival) = (src, Direction::Local, None);
    loop {
        let view = LinkFaultView::healthy(at, dims);
        let out = laft_next_port(at, dst, &view, &CongestionView::uniform(0), arrival, dims)
            .expect("fault-free mesh always routes")
            .chosen;
        hops.push((at, input, out));
        if out.is_local() {
            return hops;
        }
        at = neighbor(at, out, dims).expect("route stays in the mesh");
        input = out.inverse();
        arrival = Some(out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrmClass {
    Buffer,
    Crossbar,
    Channel,
}

impl DdrmClass {
    pub const ALL: [DdrmClass; 3] = [DdrmClass::Buffer, DdrmClass::Crossbar, DdrmClass::Channel];

    pub fn name(self) -> &'static str {
        match self {
            DdrmClass::Buffer => "buffer",
            DdrmClass::Crossbar => "crossbar",
            DdrmClass::Channel => "channel",
        }
    }
}

fn uses(target: &FaultTarget, path: &[Hop]) -> bool {
    path.iter().any(|&(n, i, o)| match *target {
        FaultTarget::BufferSlot { router, port, .. } => n == router && i == port,
        FaultTarget::CrossbarPath { router, input, output } => n == router && i == input && o == output,
        FaultTarget::Channel { router, direction } => n == router && o == direction,
        FaultTarget::Controller { .. } => false,
    })
}

fn draw_target(rng: &mut ChaCha8Rng, class: DdrmClass, dims: Dims, depth: usize) -> FaultTarget {
    let router = dims.coord_of(rng.gen_range(0..dims.node_count()));
    let ports: Vec<Direction> =
        Direction::ALL.into_iter().filter(|&d| d.is_local() || neighbor(router, d, dims).is_some()).collect();
    let pick = |rng: &mut ChaCha8Rng, from: &[Direction]| *from.choose(rng).expect("nonempty");
    match class {
        DdrmClass::Buffer => FaultTarget::BufferSlot { router, port: pick(rng, &ports), slot: rng.gen_range(0..depth) },
        DdrmClass::Crossbar => {
            let input = pick(rng, &ports);
            let outs: Vec<Direction> = ports.iter().copied().filter(|&o| o != input).collect();
            FaultTarget::CrossbarPath { router, input, output: pick(rng, &outs) }
        }
        DdrmClass::Channel => {
            let mesh: Vec<Direction> = ports.into_iter().filter(|d| !d.is_local()).collect();
            FaultTarget::Channel { router, direction: pick(rng, &mesh) }
        }
    }
}

/// Two lanes of codeword B, which carries only payload and its check bits.
/// Codeword A is mostly header fields that can stay constant for a whole
/// workload, leaving a stuck-at fault there latent.
fn payload_lanes(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let lanes: Vec<u8> = (CODEWORD_BITS as u8..FLIT_BITS as u8).collect();
    let mut bits: Vec<u8> = lanes.choose_multiple(rng, 2).copied().collect();
    bits.sort_unstable();
    bits
}

/// Inject one random double-lane stuck-at fault of `class` into a 3x3x3
/// FETO mesh, drive packets across it one at a time, and check that DDRM
/// ends in the recovery matching the fault's location. Locations no
/// fault-free route crosses are redrawn.
pub fn ddrm_trial(class: DdrmClass, seed: u64) -> Result<FaultTarget, String> {
    let dims = Dims::new(3, 3, 3);
    let cfg = NetworkConfig::for_variant(dims, Variant::Feto).with_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDD_0000);
    let pairs: Vec<(Coord3, Coord3)> =
        dims.coords().flat_map(|s| dims.coords().filter(move |&d| d != s).map(move |d| (s, d))).collect();
    let (target, flows) = loop {
        let t = draw_target(&mut rng, class, dims, cfg.buffer_depth);
        let flows: Vec<(Coord3, Coord3)> =
            pairs.iter().copied().filter(|&(s, d)| uses(&t, &laft_path(dims, s, d))).collect();
        if !flows.is_empty() {
            break (t, flows);
        }
    };
    let fault = HardFault { target, stuck_at: rng.gen_range(0..=1), bits: payload_lanes(&mut rng), onset_cycle: 0 };
    let mut net = Network::new(cfg, &FaultPlan::none()).map_err(|e| e.to_string())?;
    net.add_hard_fault(fault.clone());

    let terminal = |net: &Network| {
        let c = net.counters();
        c.rab_flags + c.bypasses_kept + c.links_marked > 0
    };
    for _ in 0..200 {
        let (s, d) = *flows.choose(&mut rng).expect("flows");
        net.add_packet(s, d, 10);
        net.run_until_idle(20_000);
        if terminal(&net) && net.all_ddrm_idle() {
            break;
        }
    }
    if !terminal(&net) {
        return Err(format!("{fault:?}: no recovery after 200 packets"));
    }

    let flagged: Vec<(Coord3, BufferPosition)> =
        dims.coords().flat_map(|c| net.flagged_slots(c).into_iter().map(move |p| (c, p))).collect();
    let bypasses: Vec<(Coord3, Direction, Direction)> =
        dims.coords().flat_map(|c| net.crossbar(c).mapped().map(move |(_, i, o)| (c, i, o)).collect::<Vec<_>>()).collect();
    let marked = net.marked_links();
    let got = format!("flagged {flagged:?}, bypasses {bypasses:?}, marked {marked:?}");
    let ok = match target {
        FaultTarget::BufferSlot { router, port, slot } => {
            flagged == [(router, BufferPosition { port, slot })] && bypasses.is_empty() && marked.is_empty()
        }
        FaultTarget::CrossbarPath { router, input, output } => {
            flagged.is_empty() && bypasses == [(router, input, output)] && marked.is_empty()
        }
        FaultTarget::Channel { router, direction } => {
            flagged.is_empty() && bypasses.is_empty() && marked.contains(&(router, direction))
                && marked.iter().all(|&(c, d)| (c, d) == (router, direction) || neighbor(router, direction, dims) == Some(c))
        }
        FaultTarget::Controller { .. } => false,
    };
    if ok {
        Ok(target)
    } else {
        Err(format!("{fault:?}: {got}"))
    }
}

pub fn check_ddrm(trials: usize) -> Check {
    let mut failures = Vec::new();
    for class in DdrmClass::ALL {
        for t in 0..trials {
            if let Err(e) = ddrm_trial(class, t as u64 + 1) {
                failures.push(format!("{} #{t}: {e}", class.name()));
            }
        }
    }
    let total = 3 * trials;
    Check {
        name: "ddrm-classification",
        passed: failures.is_empty(),
        detail: match failures.first() {
            None => format!("{total}/{total} trials recovered at the faulty location"),
            Some(f) => format!("{}/{total} wrong; first: {f}", failures.len()),
        },
    }
}

// ---- replay and conservation ------------------------------------------------------

fn smoke_config() -> (NetworkConfig, FaultPlan, TrafficSource) {
    let cfg = NetworkConfig::for_variant(Dims::new(3, 3, 3), Variant::Feto).with_seed(7);
    let plan = crate::fault::plan_hard_faults(&cfg, 20.0, crate::fault::Distribution::Datapath, 7, 2)
        .expect("valid plan")
        .with_soft_rate(0.2);
    let src = TrafficSource { total_packets: Some(540), ..TrafficSource::new(TrafficKind::Uniform, 7) };
    (cfg, plan, src)
}

pub fn smoke_run(perturb: bool) -> MetricsReport {
    let (cfg, plan, mut src) = smoke_config();
    if perturb {
        src.seed ^= 1;
    }
    run(&cfg, &plan, &src).expect("smoke run")
}

pub fn check_replay(hooks: &Hooks) -> Check {
    let a = smoke_run(false);
    let b = smoke_run(hooks.perturb_replay);
    let same = a == b;
    Check {
        name: "determinism-replay",
        passed: same,
        detail: if same { "two runs with one seed are identical".into() } else { "replayed run diverged".into() },
    }
}

pub fn check_conservation() -> Check {
    let r = smoke_run(false);
    Check {
        name: "conservation",
        passed: r.is_conserved(),
        detail: format!(
            "injected {} = delivered {} + lost {}, {} duplicates",
            r.injected_packets, r.delivered_packets, r.lost_packets, r.counters.duplicate_ejections
        ),
    }
}

/// The full fast suite.
pub fn run_selftest(hooks: &Hooks) -> Vec<Check> {
    vec![check_secded(&hooks.h_matrix), check_ddrm(10), check_replay(hooks), check_conservation()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_is_minimal() {
        let d = Dims::new(3, 3, 3);
        let p = laft_path(d, Coord3::new(0, 0, 0), Coord3::new(2, 1, 2));
        assert_eq!(p.len(), 6);
        assert_eq!(p[0].1, Direction::Local);
        assert_eq!(p.last().unwrap().2, Direction::Local);
    }

    #[test]
    fn corrupted_matrix_fails() {
        let mut cols = *HMatrix::hsiao().columns();
        cols[3] = cols[4];
        assert!(!check_secded(&HMatrix::from_columns(cols)).passed);
        assert!(check_secded(&HMatrix::hsiao()).passed);
    }

    #[test]
    fn perturbed_replay_fails() {
        assert!(!check_replay(&Hooks { perturb_replay: true, ..Hooks::default() }).passed);
        assert!(check_replay(&Hooks::default()).passed);
    }
}

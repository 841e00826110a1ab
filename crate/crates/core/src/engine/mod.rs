// SPDX-License-Identifier: Apache-2.0
//! Cycle-driven flit-level network simulator.
//!
//! Each router has seven input buffers (RAB), a BLoD crossbar, and per
//! output an ARQ endpoint, a DDRM controller and one channel register that
//! carries the flit sent in this cycle to the neighbour's input buffer in
//! the next. Per-hop pipeline: buffer write, NPC/SA (doubled under PCR),
//! crossbar and link traversal.

mod metrics;
mod step;

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::Serialize;

pub use metrics::{Counters, MetricsReport, HISTOGRAM_BUCKET};

use crate::codec::PackedFlit;
use crate::error::Result;
use crate::fault::{FaultPlan, FaultTarget, HardFault, SoftErrorProcess, SoftEvent};
use crate::model::{neighbor, Coord3, Direction, Flit, NetworkConfig, PacketId, PAYLOAD_BITS};
use crate::router::{ArqEndpoint, BlodCrossbar, BufferPosition, DdrmCommand, DdrmState, RabBuffer, SwitchAllocator};
use crate::routing::LinkFaultView;
use crate::traffic::{gen_traffic, Injection, TrafficSource};
use metrics::LatencyStats;

/// Why a packet was lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossReason {
    NoRoute,
    Blocked,
    Misrouted,
    Corrupted,
    Unrecoverable,
    MisrouteBudget,
    DrainTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum EngineEvent {
    Created { cycle: u64, packet: PacketId },
    Retransmission { cycle: u64, router: Coord3, output: Direction, packet: PacketId, seq: u16 },
    Corrected { cycle: u64, router: Coord3, output: Direction },
    Ddrm { cycle: u64, router: Coord3, output: Direction, state: &'static str, command: String },
    PcrMismatch { cycle: u64, router: Coord3, input: Direction },
    Soft { cycle: u64, router: Coord3, masked: bool },
    LinkMarked { cycle: u64, router: Coord3, output: Direction },
    Delivered { cycle: u64, packet: PacketId, latency: u64 },
    Lost { cycle: u64, packet: PacketId, reason: LossReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketOutcome {
    Pending,
    Delivered { latency: u64 },
    Lost(LossReason),
}

#[derive(Debug, Clone)]
struct PacketRec {
    dst: Coord3,
    len: u16,
    created: u64,
    ejected: u16,
    corrupted: bool,
    nonminimal: u32,
    outcome: PacketOutcome,
}

impl PacketRec {
    fn finished(&self) -> bool {
        self.outcome != PacketOutcome::Pending
    }
}

/// A buffered flit. `lookahead` is the port computed for the downstream
/// router once the header wins allocation.
#[derive(Debug, Clone)]
struct Entry {
    flit: Flit,
    arrived: u64,
    in_flight: bool,
    lookahead: Option<Direction>,
}

#[derive(Debug, Clone)]
struct InPort {
    rab: RabBuffer<Entry>,
    /// Output held by the packet currently streaming through this input.
    route: Option<Direction>,
    route_packet: Option<PacketId>,
    ct_ready: u64,
    /// Stop signal seen by the upstream router.
    stop: bool,
    front: Option<(PacketId, u16)>,
    front_since: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WireKind {
    Data,
    /// Re-send of a flit relocated out of a flagged slot.
    Register,
    Probe,
    Trial,
}

#[derive(Debug, Clone)]
struct Wire {
    word: PackedFlit,
    truth: Flit,
    pos: BufferPosition,
    kind: WireKind,
}

#[derive(Debug, Clone, Default)]
struct OutPort {
    wire: Option<Wire>,
    arq: ArqEndpoint,
    retx: bool,
    register: Option<Entry>,
    ddrm: DdrmState,
}

#[derive(Debug, Clone)]
struct Router {
    coord: Coord3,
    inputs: Vec<InPort>,
    outputs: Vec<OutPort>,
    alloc: SwitchAllocator,
    xbar: BlodCrossbar,
    faults: Vec<HardFault>,
    dead: bool,
}

#[derive(Debug, Clone, Default)]
struct Ni {
    queue: VecDeque<PacketId>,
    next_seq: u16,
}

/// Reference payload of every flit, so integrity is checked without
/// storing injected data.
pub fn payload_of(packet: PacketId, seq: u16) -> u32 {
    let mut z = (u64::from(packet) << 16 | u64::from(seq)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ((z ^ (z >> 31)) as u32) & ((1 << PAYLOAD_BITS) - 1)
}

pub struct Network {
    cfg: NetworkConfig,
    cycle: u64,
    routers: Vec<Router>,
    marked: Vec<[bool; 7]>,
    views: Vec<LinkFaultView>,
    packets: Vec<PacketRec>,
    nis: Vec<Ni>,
    schedule: Vec<Injection>,
    next_injection: usize,
    soft: SoftErrorProcess,
    scheduled_soft: BTreeMap<u64, Vec<SoftEvent>>,
    link_upsets: BTreeMap<u64, Vec<(usize, Direction, u64)>>,
    ejected: HashSet<(PacketId, u16)>,
    free: Vec<[usize; 7]>,
    counters: Counters,
    latency: LatencyStats,
    delivered_flits: u64,
    delivered_packets: u64,
    lost_packets: u64,
    kill_pending: bool,
    events: Option<Vec<EngineEvent>>,
}

impl Network {
    pub fn new(cfg: NetworkConfig, plan: &FaultPlan) -> Result<Self> {
        cfg.validate()?;
        plan.validate(&cfg)?;
        let n = cfg.node_count();
        let inport = || InPort {
            rab: RabBuffer::new(cfg.buffer_depth),
            route: None,
            route_packet: None,
            ct_ready: 0,
            stop: false,
            front: None,
            front_since: 0,
        };
        let routers = (0..n)
            .map(|i| Router {
                coord: cfg.dims.coord_of(i),
                inputs: (0..7).map(|_| inport()).collect(),
                outputs: vec![OutPort::default(); 7],
                alloc: SwitchAllocator::default(),
                xbar: BlodCrossbar::new(cfg.bypass_links_per_router),
                faults: Vec::new(),
                dead: false,
            })
            .collect();
        let mut net = Network {
            routers,
            marked: vec![[false; 7]; n],
            views: cfg.dims.coords().map(|c| LinkFaultView::healthy(c, cfg.dims)).collect(),
            packets: Vec::new(),
            nis: vec![Ni::default(); n],
            schedule: Vec::new(),
            next_injection: 0,
            soft: plan.soft.clone(),
            scheduled_soft: BTreeMap::new(),
            link_upsets: BTreeMap::new(),
            ejected: HashSet::new(),
            free: vec![[cfg.buffer_depth; 7]; n],
            counters: Counters::default(),
            latency: LatencyStats::default(),
            delivered_flits: 0,
            delivered_packets: 0,
            lost_packets: 0,
            kill_pending: false,
            events: None,
            cycle: 0,
            cfg,
        };
        for f in &plan.hard {
            net.add_hard_fault(f.clone());
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn record_events(&mut self, on: bool) {
        self.events = on.then(Vec::new);
    }

    pub fn events(&self) -> &[EngineEvent] {
        self.events.as_deref().unwrap_or(&[])
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    fn idx(&self, c: Coord3) -> usize {
        self.cfg.dims.index_of(c)
    }

    /// Install a permanent fault. With hard-fault tolerance but no online
    /// detection (no ECC), the router is reconfigured around it at once.
    pub fn add_hard_fault(&mut self, f: HardFault) {
        let r = self.idx(f.target.router());
        let static_config = self.cfg.hard_ft_enabled && !self.cfg.ecc_enabled;
        match f.target {
            FaultTarget::Controller { .. } => self.routers[r].dead = true,
            FaultTarget::BufferSlot { port, slot, .. } if static_config => {
                if let Some(e) = self.routers[r].inputs[port.index()].rab.flag(slot) {
                    let pid = e.flit.packet_id;
                    self.kill(pid, LossReason::Unrecoverable);
                }
                self.counters.rab_flags += 1;
            }
            FaultTarget::CrossbarPath { input, output, .. } if static_config => {
                if self.routers[r].xbar.mark_faulty(input, output) {
                    self.counters.bypasses_kept += 1;
                } else {
                    self.counters.escalations += 1;
                    self.mark_link(r, output);
                }
            }
            FaultTarget::Channel { direction, .. } if static_config => self.mark_link(r, direction),
            _ => {}
        }
        self.routers[r].faults.push(f);
    }

    fn mark_link(&mut self, r: usize, d: Direction) {
        if self.marked[r][d.index()] {
            return;
        }
        self.marked[r][d.index()] = true;
        self.counters.links_marked += 1;
        let coord = self.routers[r].coord;
        self.log(EngineEvent::LinkMarked { cycle: self.cycle, router: coord, output: d });
        let dims = self.cfg.dims;
        let marked = &self.marked;
        for c in std::iter::once(coord).chain(Direction::MESH.iter().filter_map(|&m| neighbor(coord, m, dims))) {
            let i = dims.index_of(c);
            self.views[i] = LinkFaultView::from_fn(c, dims, |n, dir| marked[dims.index_of(n)][dir.index()]);
        }
    }

    /// Create a packet now; its flits enter the source NI queue.
    pub fn add_packet(&mut self, src: Coord3, dst: Coord3, len: usize) -> PacketId {
        assert!(len >= 1 && len <= usize::from(u16::MAX));
        let id = self.packets.len() as PacketId;
        self.packets.push(PacketRec {
            dst,
            len: len as u16,
            created: self.cycle,
            ejected: 0,
            corrupted: false,
            nonminimal: 0,
            outcome: PacketOutcome::Pending,
        });
        let s = self.idx(src);
        self.nis[s].queue.push_back(id);
        self.log(EngineEvent::Created { cycle: self.cycle, packet: id });
        if src == dst {
            self.kill(id, LossReason::NoRoute);
        }
        id
    }

    /// Queue a timed schedule; packets are created at their cycles.
    pub fn load_schedule(&mut self, mut schedule: Vec<Injection>) {
        schedule.sort_by_key(|p| p.cycle);
        self.schedule = schedule;
        self.next_injection = 0;
    }

    /// XOR `mask` into the flit leaving `router` through `dir` in `cycle`.
    pub fn schedule_link_upset(&mut self, cycle: u64, router: Coord3, dir: Direction, mask: u64) {
        let r = self.idx(router);
        self.link_upsets.entry(cycle).or_default().push((r, dir, mask));
    }

    /// Add an upset on top of the background soft-error process.
    pub fn schedule_soft_event(&mut self, event: SoftEvent) {
        self.scheduled_soft.entry(event.cycle).or_default().push(event);
    }

    pub fn packet_outcome(&self, id: PacketId) -> PacketOutcome {
        self.packets[id as usize].outcome
    }

    pub fn packet_count(&self) -> usize {
        self.packets.len()
    }

    /// Nothing queued, buffered or on a wire, and no pending creations.
    pub fn is_idle(&self) -> bool {
        self.next_injection >= self.schedule.len() && self.packets.iter().all(PacketRec::finished)
    }

    pub fn ddrm_state(&self, router: Coord3, output: Direction) -> DdrmState {
        self.routers[self.idx(router)].outputs[output.index()].ddrm
    }

    pub fn all_ddrm_idle(&self) -> bool {
        self.routers.iter().all(|r| r.outputs.iter().all(|o| o.ddrm.is_idle()))
    }

    pub fn is_slot_flagged(&self, router: Coord3, port: Direction, slot: usize) -> bool {
        self.routers[self.idx(router)].inputs[port.index()].rab.is_flagged(slot)
    }

    pub fn flagged_slots(&self, router: Coord3) -> Vec<BufferPosition> {
        let r = &self.routers[self.idx(router)];
        Direction::ALL
            .iter()
            .flat_map(|&d| r.inputs[d.index()].rab.flagged().map(move |slot| BufferPosition { port: d, slot }))
            .collect()
    }

    pub fn crossbar(&self, router: Coord3) -> &BlodCrossbar {
        &self.routers[self.idx(router)].xbar
    }

    pub fn is_link_marked(&self, router: Coord3, dir: Direction) -> bool {
        self.marked[self.idx(router)][dir.index()]
    }

    pub fn marked_links(&self) -> Vec<(Coord3, Direction)> {
        self.routers
            .iter()
            .enumerate()
            .flat_map(|(i, r)| Direction::ALL.into_iter().filter(move |d| self.marked[i][d.index()]).map(move |d| (r.coord, d)))
            .collect()
    }

    pub fn is_router_dead(&self, router: Coord3) -> bool {
        self.routers[self.idx(router)].dead
    }

    /// One line per router with non-default state.
    pub fn state_dump(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.routers.iter().enumerate() {
            let occ: Vec<usize> = r.inputs.iter().map(|p| p.rab.len()).collect();
            let ddrm: Vec<&str> = r.outputs.iter().map(|o| o.ddrm.name()).collect();
            let marked: String =
                Direction::ALL.iter().filter(|d| self.marked[i][d.index()]).map(|d| d.to_string()).collect();
            out.push(format!(
                "router {} occ={:?} ddrm={:?} bypass={} esc={} marked=[{}]{}",
                r.coord,
                occ,
                ddrm,
                r.xbar.pool_size() - r.xbar.available_bypasses(),
                r.xbar.escalation_flags(),
                marked,
                if r.dead { " dead" } else { "" }
            ));
        }
        out
    }

    fn log(&mut self, e: EngineEvent) {
        if let Some(v) = self.events.as_mut() {
            v.push(e);
        }
    }

    fn kill(&mut self, pid: PacketId, reason: LossReason) {
        let rec = &mut self.packets[pid as usize];
        if rec.finished() {
            return;
        }
        rec.outcome = PacketOutcome::Lost(reason);
        self.lost_packets += 1;
        self.counters.packets_killed += 1;
        match reason {
            LossReason::Blocked => self.counters.blocked_timeouts += 1,
            LossReason::NoRoute => self.counters.no_route_drops += 1,
            _ => {}
        }
        self.kill_pending = true;
        self.log(EngineEvent::Lost { cycle: self.cycle, packet: pid, reason });
    }

    fn is_killed(&self, pid: PacketId) -> bool {
        matches!(self.packets[pid as usize].outcome, PacketOutcome::Lost(_))
    }

    /// Step until every packet has finished or `max_cycles` more cycles
    /// elapse; unfinished packets are then counted lost.
    pub fn run_until_idle(&mut self, max_cycles: u64) {
        let limit = self.cycle + max_cycles;
        while !self.is_idle() && self.cycle < limit {
            self.step();
        }
    }

    /// Run the loaded schedule to completion or drain timeout.
    pub fn run_to_completion(&mut self) -> MetricsReport {
        let last = self.schedule.last().map_or(0, |p| p.cycle);
        let deadline = last + self.cfg.drain_timeout_cycles;
        while !self.is_idle() && self.cycle <= deadline {
            self.step();
        }
        self.finish()
    }

    /// Count any unfinished packet as lost and produce the report.
    pub fn finish(&mut self) -> MetricsReport {
        let pending: Vec<PacketId> =
            (0..self.packets.len() as PacketId).filter(|&p| !self.packets[p as usize].finished()).collect();
        for p in pending {
            self.kill(p, LossReason::DrainTimeout);
        }
        self.report()
    }

    pub fn report(&self) -> MetricsReport {
        let injected = self.packets.len() as u64;
        let cycles = self.cycle.max(1);
        MetricsReport {
            injected_packets: injected,
            delivered_packets: self.delivered_packets,
            lost_packets: self.lost_packets,
            average_packet_latency: self.latency.mean(),
            throughput: self.delivered_flits as f64 / (cycles as f64 * self.cfg.node_count() as f64),
            arrival_rate: if injected == 0 { 100.0 } else { 100.0 * self.delivered_packets as f64 / injected as f64 },
            latency_histogram: self.latency.histogram(),
            simulation_cycles: self.cycle,
            counters: self.counters.clone(),
        }
    }

    fn ddrm_event(&mut self, r: usize, o: Direction, cmd: DdrmCommand) {
        if self.events.is_some() {
            let e = EngineEvent::Ddrm {
                cycle: self.cycle,
                router: self.routers[r].coord,
                output: o,
                state: self.routers[r].outputs[o.index()].ddrm.name(),
                command: format!("{cmd:?}"),
            };
            self.log(e);
        }
    }
}

/// Simulate `src` on a network built from `cfg` with `plan` installed.
pub fn run(cfg: &NetworkConfig, plan: &FaultPlan, src: &TrafficSource) -> Result<MetricsReport> {
    let schedule = gen_traffic(src, cfg)?;
    let mut net = Network::new(cfg.clone(), plan)?;
    net.load_schedule(schedule);
    Ok(net.run_to_completion())
}

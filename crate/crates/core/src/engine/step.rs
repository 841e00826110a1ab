// SPDX-License-Identifier: Apache-2.0
//! One simulated clock cycle.

use super::{Entry, EngineEvent, LossReason, Network, PacketOutcome, Wire, WireKind};
use crate::codec::{flit_pack, flit_unpack, flit_unpack_raw, DecodeStatus, PackedFlit, FLIT_BITS};
use crate::fault::{sample_soft_errors, FaultTarget, SoftEvent, SoftTarget};
use crate::model::{neighbor, Direction, Flit, FlitKind, PacketId, RoutingAlgorithm};
use crate::router::{
    crossbar_traverse, ddrm_step, pcr_execute, ArqAction, BufferPosition, DdrmCommand, DdrmObservation, DdrmState,
    InputMask, SoftErrorHooks,
};
use crate::routing::{laft_next_port, xyz_next_port, CongestionView};

/// Look-ahead result: chosen port and whether it was a minimal hop.
type Npc = Result<(Direction, bool), ()>;

fn dir(i: usize) -> Direction {
    Direction::from_index(i).expect("port index")
}

/// Queue position of the oldest entry not awaiting acknowledgement.
fn front_pos(rab: &crate::router::RabBuffer<Entry>) -> Option<usize> {
    (0..rab.len()).find(|&p| rab.get(p).is_some_and(|(_, e)| !e.in_flight))
}

/// Another direction chosen by `sel`.
fn other_dir(d: Direction, sel: u32) -> Direction {
    dir((d.index() + 1 + (sel as usize % 6)) % 7)
}

impl Network {
    /// Advance one clock cycle.
    pub fn step(&mut self) {
        let now = self.cycle;
        self.deliver_all();
        self.create_packets();
        let soft = self.soft_events();
        self.snapshot();
        if self.kill_pending {
            self.purge();
        }
        let mut pipeline_hits: Vec<Vec<SoftEvent>> = vec![Vec::new(); self.routers.len()];
        let mut link_hits = Vec::new();
        for e in soft {
            match e.target {
                SoftTarget::LinkFlit => link_hits.push(e),
                _ => pipeline_hits[e.router].push(e),
            }
        }
        for r in 0..self.routers.len() {
            if self.routers[r].dead {
                self.counters.soft_masked += pipeline_hits[r].len() as u64;
                continue;
            }
            self.ct_phase(r);
            self.sa_phase(r, &pipeline_hits[r]);
            self.inject_phase(r);
        }
        self.apply_link_upsets(&link_hits);
        self.check_stalls();
        self.cycle = now + 1;
    }

    fn soft_events(&mut self) -> Vec<SoftEvent> {
        let mut v = sample_soft_errors(&self.soft, self.cycle, self.routers.len());
        if let Some(extra) = self.scheduled_soft.remove(&self.cycle) {
            v.extend(extra);
        }
        self.counters.soft_events += v.len() as u64;
        v
    }

    fn create_packets(&mut self) {
        while let Some(p) = self.schedule.get(self.next_injection).copied() {
            if p.cycle > self.cycle {
                break;
            }
            self.next_injection += 1;
            self.add_packet(p.source, p.destination, p.length);
        }
    }

    /// Free-slot snapshot and stop-go signals for this cycle.
    fn snapshot(&mut self) {
        let (stop_at, go_at) = (self.cfg.stop_threshold, self.cfg.go_threshold);
        for (r, router) in self.routers.iter_mut().enumerate() {
            for (p, input) in router.inputs.iter_mut().enumerate() {
                let free = input.rab.free_slots();
                self.free[r][p] = free;
                if free <= stop_at {
                    input.stop = true;
                } else if free >= go_at {
                    input.stop = false;
                }
            }
        }
    }

    fn downstream(&self, r: usize, o: Direction) -> Option<(usize, usize)> {
        if o.is_local() {
            return None;
        }
        neighbor(self.routers[r].coord, o, self.cfg.dims).map(|n| (self.cfg.dims.index_of(n), o.inverse().index()))
    }

    // ---- delivery -------------------------------------------------------

    fn deliver_all(&mut self) {
        for r in 0..self.routers.len() {
            for o in 0..7 {
                if let Some(w) = self.routers[r].outputs[o].wire.take() {
                    self.deliver(r, dir(o), w);
                }
            }
        }
    }

    fn release_sender(&mut self, r: usize, o: Direction, w: &Wire) {
        let out = &mut self.routers[r].outputs[o.index()];
        out.arq.arq_counter = 0;
        out.arq.buffer_position = None;
        out.retx = false;
        match w.kind {
            WireKind::Register => out.register = None,
            WireKind::Data | WireKind::Trial => {
                self.routers[r].inputs[w.pos.port.index()].rab.take_slot(w.pos.slot);
            }
            WireKind::Probe => {}
        }
    }

    /// The sent copy stays put for another attempt.
    fn unsend(&mut self, r: usize, o: Direction, w: &Wire) {
        let router = &mut self.routers[r];
        let out = &mut router.outputs[o.index()];
        match w.kind {
            WireKind::Register => {
                if let Some(e) = out.register.as_mut() {
                    e.in_flight = false;
                }
            }
            _ => {
                if let Some(e) = router.inputs[w.pos.port.index()].rab.slot_mut(w.pos.slot) {
                    e.in_flight = false;
                }
            }
        }
    }

    fn deliver(&mut self, r: usize, o: Direction, w: Wire) {
        let now = self.cycle;
        let mut word = w.word;
        if !o.is_local() {
            for f in &self.routers[r].faults {
                if matches!(f.target, FaultTarget::Channel { direction, .. } if direction == o) && f.active_at(now) {
                    word = f.apply(word);
                }
            }
        }
        let pid = w.truth.packet_id;
        let seq = w.truth.seq_index;
        if w.kind == WireKind::Probe {
            let clean = !self.decode(word, pid, seq).1.is_uncorrectable();
            self.ddrm_observe(r, o, DdrmObservation::Probe { clean });
            return;
        }
        if self.is_killed(pid) {
            self.release_sender(r, o, &w);
            self.abort_episode_at(r, o, w.pos);
            return;
        }
        let (received, status) = self.decode(word, pid, seq);
        if status.is_uncorrectable() {
            self.unsend(r, o, &w);
            if w.kind == WireKind::Trial {
                self.ddrm_observe(r, o, DdrmObservation::Trial { clean: false });
                return;
            }
            self.counters.retransmissions += 1;
            let coord = self.routers[r].coord;
            self.log(EngineEvent::Retransmission { cycle: now, router: coord, output: o, packet: pid, seq });
            let action = self.routers[r].outputs[o.index()].arq.on_delivery_status(status);
            match action {
                ArqAction::Release => unreachable!("uncorrectable delivery acknowledged"),
                ArqAction::Retransmit => self.routers[r].outputs[o.index()].retx = true,
                ArqAction::RetransmitAndDetect(pos) => {
                    if self.cfg.hard_ft_enabled {
                        self.counters.ddrm_episodes += 1;
                        self.ddrm_observe(r, o, DdrmObservation::Detected(pos));
                        if w.kind == WireKind::Register {
                            // The slot is gone; go straight to the crossbar trial.
                            self.ddrm_observe(r, o, DdrmObservation::Probe { clean: false });
                            self.ddrm_observe(r, o, DdrmObservation::Probe { clean: false });
                        }
                    } else {
                        self.kill(pid, LossReason::Unrecoverable);
                        self.release_sender(r, o, &w);
                    }
                }
            }
            return;
        }
        if let DecodeStatus::Corrected(_) = status {
            self.counters.corrected_flits += 1;
            let coord = self.routers[r].coord;
            self.log(EngineEvent::Corrected { cycle: now, router: coord, output: o });
        }
        let t = &w.truth;
        let header_bad = received.kind != t.kind
            || (t.kind.is_head() && (received.destination != t.destination || received.next_port != t.next_port));
        if header_bad {
            self.kill(pid, LossReason::Misrouted);
            self.release_sender(r, o, &w);
            self.abort_episode_at(r, o, w.pos);
            return;
        }
        if received.payload != t.payload {
            self.packets[pid as usize].corrupted = true;
        }
        match self.downstream(r, o) {
            Some((n, p)) => {
                if self.routers[n].inputs[p].rab.free_slots() == 0 {
                    self.unsend(r, o, &w);
                    self.routers[r].outputs[o.index()].retx = true;
                    return;
                }
                self.routers[n].inputs[p].rab.write(Entry { flit: received, arrived: now, in_flight: false, lookahead: None });
            }
            None => self.eject(r, received),
        }
        self.release_sender(r, o, &w);
        if w.kind == WireKind::Trial {
            self.ddrm_observe(r, o, DdrmObservation::Trial { clean: true });
        }
    }

    fn decode(&self, word: PackedFlit, pid: PacketId, seq: u16) -> (Flit, DecodeStatus) {
        if self.cfg.ecc_enabled {
            let u = flit_unpack(word, pid, seq);
            let s = u.status();
            (u.flit, s)
        } else {
            (flit_unpack_raw(word, pid, seq), DecodeStatus::Clean)
        }
    }

    fn eject(&mut self, r: usize, f: Flit) {
        let now = self.cycle;
        let pid = f.packet_id;
        if !self.ejected.insert((pid, f.seq_index)) {
            self.counters.duplicate_ejections += 1;
            return;
        }
        self.counters.flits_ejected += 1;
        let here = self.routers[r].coord;
        let rec = &mut self.packets[pid as usize];
        rec.ejected += 1;
        if here != rec.dst || f.payload != super::payload_of(pid, f.seq_index) {
            rec.corrupted = true;
        }
        if f.kind.is_tail() {
            if rec.ejected == rec.len && !rec.corrupted {
                let latency = now - rec.created;
                rec.outcome = PacketOutcome::Delivered { latency };
                self.delivered_flits += u64::from(rec.len);
                self.delivered_packets += 1;
                self.latency.record(latency);
                self.log(EngineEvent::Delivered { cycle: now, packet: pid, latency });
            } else {
                self.counters.corrupted_deliveries += 1;
                self.kill(pid, LossReason::Corrupted);
            }
        }
    }

    // ---- DDRM -----------------------------------------------------------

    fn abort_episode_at(&mut self, r: usize, o: Direction, pos: BufferPosition) {
        if self.routers[r].outputs[o.index()].ddrm.position() == Some(pos) {
            self.ddrm_observe(r, o, DdrmObservation::Abort);
        }
    }

    fn ddrm_observe(&mut self, r: usize, o: Direction, obs: DdrmObservation) {
        let st = self.routers[r].outputs[o.index()].ddrm;
        let (next, cmd) = ddrm_step(st, obs);
        self.routers[r].outputs[o.index()].ddrm = next;
        if cmd != DdrmCommand::None {
            self.ddrm_event(r, o, cmd);
        }
        match cmd {
            DdrmCommand::None | DdrmCommand::Probe | DdrmCommand::Retransmit => {}
            DdrmCommand::RabFlag(pos) => {
                self.counters.rab_flags += 1;
                let occupant = self.routers[r].inputs[pos.port.index()].rab.flag(pos.slot);
                let out = &mut self.routers[r].outputs[o.index()];
                if let Some(mut e) = occupant {
                    e.in_flight = false;
                    out.register = Some(e);
                    out.retx = true;
                }
            }
            DdrmCommand::MapBypass => {
                let pos = next.position().expect("trial has a position");
                if self.routers[r].xbar.map_bypass(pos.port, o).is_none() {
                    self.ddrm_observe(r, o, DdrmObservation::BypassUnavailable);
                }
            }
            DdrmCommand::KeepBypass => {
                let pos = st.position().expect("trial has a position");
                self.routers[r].xbar.mark_faulty(pos.port, o);
                self.counters.bypasses_kept += 1;
            }
            DdrmCommand::MarkLink { release_bypass } => {
                let pos = next.position().expect("marking has a position");
                if release_bypass {
                    self.routers[r].xbar.release_bypass(pos.port, o);
                } else {
                    self.routers[r].xbar.escalate(o);
                    self.counters.escalations += 1;
                }
                self.mark_link(r, o);
                self.reroute_monitored(r, o, pos);
                self.ddrm_observe(r, o, DdrmObservation::Rerouted);
            }
        }
    }

    /// After a link is marked, a waiting header picks a new output; a
    /// packet already streaming through the link cannot be saved.
    fn reroute_monitored(&mut self, r: usize, o: Direction, pos: BufferPosition) {
        let router = &mut self.routers[r];
        let out = &mut router.outputs[o.index()];
        out.arq.arq_counter = 0;
        out.arq.buffer_position = None;
        out.retx = false;
        let victim = if let Some(e) = out.register.take() {
            Some(e.flit.packet_id)
        } else {
            let input = &mut router.inputs[pos.port.index()];
            match input.rab.slot_mut(pos.slot) {
                Some(e) if e.flit.kind.is_head() && input.route == Some(o) => {
                    e.lookahead = None;
                    e.in_flight = false;
                    input.route = None;
                    input.route_packet = None;
                    router.alloc.release(o);
                    None
                }
                Some(e) => Some(e.flit.packet_id),
                None => None,
            }
        };
        if let Some(pid) = victim {
            self.kill(pid, LossReason::Unrecoverable);
        }
    }

    // ---- purge of lost packets ------------------------------------------

    fn purge(&mut self) {
        self.kill_pending = false;
        let lost: Vec<bool> = self.packets.iter().map(|p| matches!(p.outcome, PacketOutcome::Lost(_))).collect();
        let dead = |pid: PacketId| lost[pid as usize];
        for r in 0..self.routers.len() {
            let router = &mut self.routers[r];
            for p in 0..7 {
                let input = &mut router.inputs[p];
                input.rab.retain(|e| e.in_flight || !dead(e.flit.packet_id));
                if let (Some(o), Some(pid)) = (input.route, input.route_packet) {
                    if dead(pid) {
                        input.route = None;
                        input.route_packet = None;
                        router.alloc.release(o);
                    }
                }
            }
            for o in 0..7 {
                let out = &mut router.outputs[o];
                if out.register.as_ref().is_some_and(|e| dead(e.flit.packet_id)) && out.wire.is_none() {
                    out.register = None;
                    out.retx = false;
                    out.arq.buffer_position = None;
                    out.arq.arq_counter = 0;
                }
                if out.retx && out.register.is_none() {
                    let gone = out
                        .arq
                        .buffer_position
                        .is_none_or(|pos| router.inputs[pos.port.index()].rab.slot(pos.slot).is_none());
                    if gone {
                        out.retx = false;
                        out.arq.buffer_position = None;
                        out.arq.arq_counter = 0;
                    }
                }
            }
            for o in 0..7 {
                let st = router.outputs[o].ddrm;
                if let Some(pos) = st.position() {
                    let missing = router.inputs[pos.port.index()].rab.slot(pos.slot).is_none()
                        && router.outputs[o].register.is_none();
                    if missing && router.outputs[o].wire.is_none() {
                        router.outputs[o].ddrm = DdrmState::Idle;
                        router.outputs[o].arq.buffer_position = None;
                        router.outputs[o].arq.arq_counter = 0;
                        router.outputs[o].retx = false;
                    }
                }
            }
        }
        for ni in &mut self.nis {
            let mut popped_front = false;
            while let Some(&pid) = ni.queue.front() {
                if !dead(pid) {
                    break;
                }
                ni.queue.pop_front();
                popped_front = true;
            }
            if popped_front {
                ni.next_seq = 0;
            }
            let head = ni.queue.front().copied();
            ni.queue.retain(|&pid| Some(pid) == head || !dead(pid));
        }
    }

    // ---- crossbar and link traversal ------------------------------------

    fn slot_read(&self, r: usize, port: Direction, slot: usize, f: &Flit) -> PackedFlit {
        let mut word = flit_pack(f);
        for fault in &self.routers[r].faults {
            if matches!(fault.target, FaultTarget::BufferSlot { port: p, slot: s, .. } if p == port && s == slot)
                && fault.active_at(self.cycle)
            {
                word = fault.apply(word);
            }
        }
        word
    }

    fn traverse(&self, r: usize, input: Direction, o: Direction, read: PackedFlit, e: &Entry) -> (PackedFlit, Flit) {
        let now = self.cycle;
        let router = &self.routers[r];
        let faults = router.faults.iter().filter(|f| {
            matches!(f.target, FaultTarget::CrossbarPath { input: i, output: out, .. } if i == input && out == o)
                && f.active_at(now)
        });
        let (word, _) = crossbar_traverse(&router.xbar, input, o, read, &e.flit, e.lookahead, faults);
        let mut truth = e.flit;
        if let Some(p) = e.lookahead {
            truth.next_port = p;
        }
        (word, truth)
    }

    fn room(&self, r: usize, o: Direction) -> bool {
        match self.downstream(r, o) {
            Some((n, p)) => self.free[n][p] > 0,
            None => o.is_local(),
        }
    }

    fn send_from_slot(&mut self, r: usize, o: Direction, pos: BufferPosition, read_slot: usize, kind: WireKind) -> bool {
        let Some(e) = self.routers[r].inputs[pos.port.index()].rab.slot(pos.slot).cloned() else {
            return false;
        };
        let read = self.slot_read(r, pos.port, read_slot, &e.flit);
        let (word, truth) = self.traverse(r, pos.port, o, read, &e);
        if kind != WireKind::Probe {
            if let Some(en) = self.routers[r].inputs[pos.port.index()].rab.slot_mut(pos.slot) {
                en.in_flight = true;
            }
        }
        self.routers[r].outputs[o.index()].wire = Some(Wire { word, truth, pos, kind });
        true
    }

    fn ct_phase(&mut self, r: usize) {
        let now = self.cycle;
        for oi in 0..7 {
            let o = dir(oi);
            if self.routers[r].outputs[oi].wire.is_some() {
                continue;
            }
            let room = self.room(r, o);
            match self.routers[r].outputs[oi].ddrm {
                DdrmState::BufferCheck { position, probes_sent, .. } => {
                    let rab = &self.routers[r].inputs[position.port.index()].rab;
                    let alternates: Vec<usize> =
                        (0..rab.depth()).filter(|&s| s != position.slot && !rab.is_flagged(s)).collect();
                    let alt = if alternates.is_empty() {
                        position.slot
                    } else {
                        alternates[probes_sent as usize % alternates.len()]
                    };
                    if !self.send_from_slot(r, o, position, alt, WireKind::Probe) {
                        self.ddrm_observe(r, o, DdrmObservation::Abort);
                    }
                    continue;
                }
                DdrmState::BlodTrial { position, .. } => {
                    if room && !self.send_from_slot(r, o, position, position.slot, WireKind::Trial) {
                        self.ddrm_observe(r, o, DdrmObservation::Abort);
                    }
                    continue;
                }
                DdrmState::Detected { .. } | DdrmState::LinkMarked { .. } => continue,
                DdrmState::Idle => {}
            }
            if self.routers[r].outputs[oi].retx {
                if !room {
                    continue;
                }
                if let Some(e) = self.routers[r].outputs[oi].register.clone() {
                    let pos = self.routers[r].outputs[oi].arq.buffer_position.expect("register has a position");
                    let read = flit_pack(&e.flit);
                    let (word, truth) = self.traverse(r, pos.port, o, read, &e);
                    let out = &mut self.routers[r].outputs[oi];
                    out.register.as_mut().expect("register").in_flight = true;
                    out.wire = Some(Wire { word, truth, pos, kind: WireKind::Register });
                    out.retx = false;
                } else if let Some(pos) = self.routers[r].outputs[oi].arq.buffer_position {
                    if self.send_from_slot(r, o, pos, pos.slot, WireKind::Data) {
                        self.routers[r].outputs[oi].retx = false;
                    }
                }
                continue;
            }
            if self.routers[r].outputs[oi].arq.in_flight() || !room {
                continue;
            }
            let Some(i) = self.routers[r].alloc.holder(o) else { continue };
            let input = &self.routers[r].inputs[i.index()];
            if input.route != Some(o) {
                continue;
            }
            let Some(fp) = front_pos(&input.rab) else { continue };
            let (slot, e) = input.rab.get(fp).expect("front entry");
            if Some(e.flit.packet_id) != input.route_packet {
                continue;
            }
            let ready = if e.flit.kind.is_head() { now >= input.ct_ready } else { now >= e.arrived + 2 };
            if !ready {
                continue;
            }
            let tail = e.flit.kind.is_tail();
            let pos = BufferPosition { port: i, slot };
            self.send_from_slot(r, o, pos, slot, WireKind::Data);
            let router = &mut self.routers[r];
            router.outputs[oi].arq.send(pos);
            if tail {
                router.alloc.release(o);
                let input = &mut router.inputs[i.index()];
                input.route = None;
                input.route_packet = None;
            }
        }
    }

    // ---- NPC / SA -------------------------------------------------------

    fn congestion_at(&self, n: usize) -> CongestionView {
        let mut free = [self.cfg.buffer_depth; 7];
        for d in Direction::MESH {
            if let Some((m, p)) = self.downstream(n, d) {
                free[d.index()] = self.free[m][p];
            }
        }
        CongestionView { free_slots: free }
    }

    /// Route decision made at router `at` for a flit heading to `dest`.
    fn route_at(&self, at: usize, dest: crate::model::Coord3, arrival: Option<Direction>, avoid: Option<Direction>) -> Npc {
        let node = self.routers[at].coord;
        if node == dest {
            return if self.marked[at][Direction::Local.index()] { Err(()) } else { Ok((Direction::Local, true)) };
        }
        match self.cfg.routing_algorithm {
            RoutingAlgorithm::Xyz => Ok((xyz_next_port(node, dest).chosen, true)),
            RoutingAlgorithm::Laft => {
                let mut view = self.views[at];
                if let Some(a) = avoid {
                    view.mark(a);
                }
                laft_next_port(node, dest, &view, &self.congestion_at(at), arrival, self.cfg.dims)
                    .map(|d| (d.chosen, d.minimal))
                    .map_err(|_| ())
            }
        }
    }

    fn output_usable(&self, r: usize, i: Direction, o: Direction) -> bool {
        let router = &self.routers[r];
        let exists = o.is_local() || neighbor(router.coord, o, self.cfg.dims).is_some();
        exists && (i.is_local() || o != i) && !self.marked[r][o.index()] && router.xbar.is_serviceable(i, o)
    }

    /// Not held by another packet and not stopped downstream.
    fn output_free(&self, r: usize, o: Direction) -> bool {
        self.routers[r].alloc.holder(o).is_none()
            && self.downstream(r, o).is_none_or(|(n, p)| !self.routers[n].inputs[p].stop)
    }

    fn sa_phase(&mut self, r: usize, hits: &[SoftEvent]) {
        let now = self.cycle;
        let mut requests: [InputMask; 7] = [0; 7];
        let mut wants: [Option<(Direction, bool)>; 7] = [None; 7];
        for ii in 0..7 {
            let i = dir(ii);
            let input = &self.routers[r].inputs[ii];
            if input.route.is_some() {
                continue;
            }
            let Some(fp) = front_pos(&input.rab) else { continue };
            let (_, e) = input.rab.get(fp).expect("front entry");
            if !e.flit.kind.is_head() || e.arrived >= now {
                continue;
            }
            let (pid, dest) = (e.flit.packet_id, e.flit.destination);
            let mut o = e.flit.next_port;
            let mut minimal = true;
            if !self.output_usable(r, i, o) {
                let arrival = (!i.is_local()).then(|| i.inverse());
                let avoid =
                    (!o.is_local() && (o == i || self.routers[r].xbar.is_primary_faulty(i, o))).then_some(o);
                match self.route_at(r, dest, arrival, avoid) {
                    Ok((d, m)) if self.output_usable(r, i, d) => {
                        o = d;
                        minimal = m;
                    }
                    _ => {
                        self.kill(pid, LossReason::NoRoute);
                        continue;
                    }
                }
            }
            if !self.output_free(r, o) {
                if o.is_local() || now - input.front_since < self.cfg.detour_after_cycles {
                    continue;
                }
                let arrival = (!i.is_local()).then(|| i.inverse());
                match self.route_at(r, dest, arrival, Some(o)) {
                    Ok((d, m)) if self.output_usable(r, i, d) && self.output_free(r, d) => {
                        o = d;
                        minimal = m;
                    }
                    _ => continue,
                }
            }
            requests[o.index()] |= 1 << ii;
            wants[ii] = Some((o, minimal));
        }
        let grants = self.routers[r].alloc.arbitrate(&requests);
        let granted: Vec<(Direction, Direction)> =
            grants.iter().enumerate().filter_map(|(o, g)| g.map(|i| (i, dir(o)))).collect();

        // Upsets land on one of this cycle's NPC/SA computations, if any.
        let mut hooks = vec![SoftErrorHooks::NONE; granted.len()];
        let mut selectors = vec![0u32; granted.len()];
        for ev in hits {
            let coord = self.routers[r].coord;
            if granted.is_empty() {
                self.counters.soft_masked += 1;
                self.log(EngineEvent::Soft { cycle: now, router: coord, masked: true });
                continue;
            }
            let k = ev.selector as usize % granted.len();
            let instance = 1 + ((ev.selector >> 16) % 2) as u8;
            match ev.target {
                SoftTarget::NpcResult => hooks[k].npc = Some(instance),
                _ => hooks[k].sa = Some(instance),
            }
            selectors[k] = ev.selector;
            self.log(EngineEvent::Soft { cycle: now, router: coord, masked: false });
        }

        for (k, &(i, o)) in granted.iter().enumerate() {
            let input = &self.routers[r].inputs[i.index()];
            let fp = front_pos(&input.rab).expect("granted input has a flit");
            let (slot, e) = input.rab.get(fp).expect("front entry");
            let (pid, dest) = (e.flit.packet_id, e.flit.destination);
            let npc: Npc = match self.downstream(r, o) {
                None => Ok((Direction::Local, true)),
                Some((n, _)) => self.route_at(n, dest, Some(o), None),
            };
            let sel = selectors[k];
            let outcome = pcr_execute(
                self.cfg.pcr_enabled,
                || npc,
                || Some(o),
                hooks[k],
                |v: Npc| v.map(|(d, m)| (other_dir(d, sel >> 3), m)),
                |g: Option<Direction>| if sel & 1 == 0 { None } else { g.map(|d| other_dir(d, sel >> 3)) },
            );
            if outcome.npc.mismatch || outcome.sa.mismatch {
                self.counters.pcr_mismatches += 1;
                let coord = self.routers[r].coord;
                self.log(EngineEvent::PcrMismatch { cycle: now, router: coord, input: i });
            }
            let sa = *outcome.sa_result();
            match sa {
                None => continue,
                Some(g) if g != o => {
                    self.kill(pid, LossReason::Misrouted);
                    continue;
                }
                Some(_) => {}
            }
            let Ok((la, la_minimal)) = *outcome.npc_result() else {
                self.kill(pid, LossReason::NoRoute);
                continue;
            };
            let hop_minimal = wants[i.index()].is_none_or(|w| w.1);
            let rec = &mut self.packets[pid as usize];
            rec.nonminimal += u32::from(!hop_minimal) + u32::from(!la_minimal);
            let dims = self.cfg.dims;
            if rec.nonminimal > 2 * (dims.x + dims.y + dims.z) as u32 {
                self.kill(pid, LossReason::MisrouteBudget);
                continue;
            }
            let router = &mut self.routers[r];
            router.alloc.commit(o, i);
            router.alloc.hold(o, i);
            let input = &mut router.inputs[i.index()];
            input.route = Some(o);
            input.route_packet = Some(pid);
            input.ct_ready = now + u64::from(outcome.cycles_consumed);
            if let Some(en) = input.rab.slot_mut(slot) {
                en.lookahead = Some(la);
            }
        }
    }

    // ---- injection --------------------------------------------------------

    fn inject_phase(&mut self, r: usize) {
        let local = Direction::Local.index();
        loop {
            let Some(&pid) = self.nis[r].queue.front() else { return };
            if self.is_killed(pid) {
                self.nis[r].queue.pop_front();
                self.nis[r].next_seq = 0;
                continue;
            }
            if self.routers[r].inputs[local].rab.free_slots() == 0 {
                return;
            }
            let seq = self.nis[r].next_seq;
            let rec = &self.packets[pid as usize];
            let (len, dest) = (rec.len, rec.dst);
            let kind = FlitKind::for_position(seq as usize, len as usize);
            let next_port = if kind.is_head() {
                match self.route_at(r, dest, None, None) {
                    Ok((d, _)) => d,
                    Err(()) => {
                        self.kill(pid, LossReason::NoRoute);
                        continue;
                    }
                }
            } else {
                Direction::Local
            };
            let flit = Flit {
                kind,
                next_port,
                destination: dest,
                payload: super::payload_of(pid, seq),
                packet_id: pid,
                seq_index: seq,
            };
            self.routers[r].inputs[local].rab.write(Entry { flit, arrived: self.cycle, in_flight: false, lookahead: None });
            self.counters.flits_injected += 1;
            if seq + 1 == len {
                self.nis[r].queue.pop_front();
                self.nis[r].next_seq = 0;
            } else {
                self.nis[r].next_seq = seq + 1;
            }
            return;
        }
    }

    // ---- link upsets and stall detection --------------------------------

    fn apply_link_upsets(&mut self, hits: &[SoftEvent]) {
        if let Some(list) = self.link_upsets.remove(&self.cycle) {
            for (r, d, mask) in list {
                if let Some(w) = self.routers[r].outputs[d.index()].wire.as_mut() {
                    w.word = w.word.xor(mask);
                }
            }
        }
        for ev in hits {
            let coord = self.routers[ev.router].coord;
            let busy: Vec<usize> = (0..7).filter(|&o| self.routers[ev.router].outputs[o].wire.is_some()).collect();
            if busy.is_empty() || self.routers[ev.router].dead {
                self.counters.soft_masked += 1;
                self.log(EngineEvent::Soft { cycle: self.cycle, router: coord, masked: true });
                continue;
            }
            let o = busy[ev.selector as usize % busy.len()];
            let bit = (ev.selector >> 8) % FLIT_BITS;
            let w = self.routers[ev.router].outputs[o].wire.as_mut().expect("busy wire");
            w.word = w.word.flip(bit);
            self.log(EngineEvent::Soft { cycle: self.cycle, router: coord, masked: false });
        }
    }

    fn check_stalls(&mut self) {
        let now = self.cycle;
        let timeout = self.cfg.blocked_timeout_cycles;
        let mut victims = Vec::new();
        for router in &mut self.routers {
            for input in &mut router.inputs {
                let front = front_pos(&input.rab)
                    .and_then(|p| input.rab.get(p))
                    .map(|(_, e)| (e.flit.packet_id, e.flit.seq_index));
                if front != input.front {
                    input.front = front;
                    input.front_since = now;
                } else if let Some((pid, _)) = front {
                    if now - input.front_since > timeout {
                        victims.push(pid);
                        input.front_since = now;
                    }
                }
            }
        }
        for pid in victims {
            self.kill(pid, LossReason::Blocked);
        }
    }
}

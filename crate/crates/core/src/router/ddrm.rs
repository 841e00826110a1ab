// SPDX-License-Identifier: Apache-2.0
//! Detection, diagnosis and recovery state machine, one per output channel.
//!
//! Two consecutive uncorrectable deliveries of the same flit open an
//! episode. The monitored flit is first re-sent through other slots of its
//! input buffer; if those probes arrive clean the slot is at fault. Otherwise
//! a bypass link is mapped over the crossbar path and the flit is re-sent:
//! a clean delivery means the crossbar was at fault and the bypass stays,
//! two more failures mean the channel itself is broken.

use super::arq::BufferPosition;

/// Probes sent from alternate slots during buffer checking.
pub const PROBE_LEN: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DdrmState {
    #[default]
    Idle,
    Detected { position: BufferPosition },
    BufferCheck { position: BufferPosition, probes_sent: u8, probe_failures: u8 },
    BlodTrial { position: BufferPosition, failures: u8 },
    LinkMarked { position: BufferPosition },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrmObservation {
    /// ARQ counter reached two for the flit read from `position`.
    Detected(BufferPosition),
    /// ECC status of one alternate-slot probe.
    Probe { clean: bool },
    /// ECC status of a re-send through the bypass.
    Trial { clean: bool },
    /// No bypass could be mapped for the trial.
    BypassUnavailable,
    /// The monitored flit was re-routed or dropped after link marking.
    Rerouted,
    /// The episode's flit no longer exists (its packet was dropped).
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdrmCommand {
    None,
    /// Send the next probe from an alternate slot.
    Probe,
    /// Flag the slot; terminal.
    RabFlag(BufferPosition),
    /// Map a bypass over the crossbar path and re-send.
    MapBypass,
    /// Re-send through the mapped bypass.
    Retransmit,
    /// Bypass fixed it; terminal.
    KeepBypass,
    /// Channel is broken: release any bypass, mark the link for routing.
    MarkLink { release_bypass: bool },
}

impl DdrmState {
    pub fn is_idle(&self) -> bool {
        matches!(self, DdrmState::Idle)
    }

    pub fn position(&self) -> Option<BufferPosition> {
        match *self {
            DdrmState::Idle => None,
            DdrmState::Detected { position }
            | DdrmState::BufferCheck { position, .. }
            | DdrmState::BlodTrial { position, .. }
            | DdrmState::LinkMarked { position } => Some(position),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DdrmState::Idle => "idle",
            DdrmState::Detected { .. } => "detected",
            DdrmState::BufferCheck { .. } => "buffer-check",
            DdrmState::BlodTrial { .. } => "blod-trial",
            DdrmState::LinkMarked { .. } => "link-marked",
        }
    }
}

pub fn ddrm_step(st: DdrmState, obs: DdrmObservation) -> (DdrmState, DdrmCommand) {
    use DdrmCommand as C;
    use DdrmObservation as O;
    use DdrmState as S;

    if obs == O::Abort {
        return (S::Idle, C::None);
    }
    match (st, obs) {
        (S::Idle, O::Detected(position)) | (S::Detected { .. }, O::Detected(position)) => {
            (S::BufferCheck { position, probes_sent: 0, probe_failures: 0 }, C::Probe)
        }
        (S::Idle, _) => (S::Idle, C::None),
        (S::Detected { position }, _) => (S::BufferCheck { position, probes_sent: 0, probe_failures: 0 }, C::Probe),
        (S::BufferCheck { position, probes_sent, probe_failures }, O::Probe { clean }) => {
            let probes_sent = probes_sent + 1;
            let probe_failures = probe_failures + u8::from(!clean);
            if probes_sent < PROBE_LEN {
                (S::BufferCheck { position, probes_sent, probe_failures }, C::Probe)
            } else if probe_failures == 0 {
                (S::Idle, C::RabFlag(position))
            } else {
                (S::BlodTrial { position, failures: 0 }, C::MapBypass)
            }
        }
        (S::BlodTrial { .. }, O::Trial { clean: true }) => (S::Idle, C::KeepBypass),
        (S::BlodTrial { position, failures }, O::Trial { clean: false }) => {
            let failures = failures + 1;
            if failures >= 2 {
                (S::LinkMarked { position }, C::MarkLink { release_bypass: true })
            } else {
                (S::BlodTrial { position, failures }, C::Retransmit)
            }
        }
        (S::BlodTrial { position, .. }, O::BypassUnavailable) => {
            (S::LinkMarked { position }, C::MarkLink { release_bypass: false })
        }
        (S::LinkMarked { .. }, O::Rerouted) => (S::Idle, C::None),
        (s, _) => (s, C::None),
    }
}

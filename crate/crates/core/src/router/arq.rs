// SPDX-License-Identifier: Apache-2.0
//! Stop-and-wait ARQ at each output channel.

use crate::codec::DecodeStatus;
use crate::model::Direction;

/// Input port and slot a flit was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferPosition {
    pub port: Direction,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArqAction {
    /// Delivery confirmed; the held copy is released.
    Release,
    /// Resend the held copy next cycle.
    Retransmit,
    /// Resend, and two consecutive failures point at a permanent fault.
    RetransmitAndDetect(BufferPosition),
}

#[derive(Debug, Clone, Default)]
pub struct ArqEndpoint {
    pub arq_counter: u8,
    pub buffer_position: Option<BufferPosition>,
}

impl ArqEndpoint {
    pub fn send(&mut self, from: BufferPosition) {
        if self.buffer_position != Some(from) {
            self.arq_counter = 0;
        }
        self.buffer_position = Some(from);
    }

    pub fn in_flight(&self) -> bool {
        self.buffer_position.is_some()
    }

    pub fn on_delivery_status(&mut self, status: DecodeStatus) -> ArqAction {
        match status {
            DecodeStatus::Clean | DecodeStatus::Corrected(_) => {
                self.arq_counter = 0;
                self.buffer_position = None;
                ArqAction::Release
            }
            DecodeStatus::DetectedUncorrectable => {
                self.arq_counter += 1;
                if self.arq_counter >= 2 {
                    self.arq_counter = 0;
                    ArqAction::RetransmitAndDetect(self.buffer_position.expect("NACK with nothing in flight"))
                } else {
                    ArqAction::Retransmit
                }
            }
        }
    }
}

/// Free-function form matching the per-channel protocol.
pub fn arq_on_delivery_status(ep: &mut ArqEndpoint, status: DecodeStatus) -> ArqAction {
    ep.on_delivery_status(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    const POS: BufferPosition = BufferPosition { port: Direction::West, slot: 2 };

    #[test]
    fn clean_releases() {
        let mut ep = ArqEndpoint::default();
        ep.send(POS);
        assert_eq!(ep.on_delivery_status(DecodeStatus::Clean), ArqAction::Release);
        assert_eq!(ep.arq_counter, 0);
        assert!(!ep.in_flight());
    }

    #[test]
    fn transient_costs_one_retransmission() {
        let mut ep = ArqEndpoint::default();
        ep.send(POS);
        assert_eq!(ep.on_delivery_status(DecodeStatus::DetectedUncorrectable), ArqAction::Retransmit);
        assert_eq!(ep.on_delivery_status(DecodeStatus::Corrected(4)), ArqAction::Release);
        assert_eq!(ep.arq_counter, 0);
    }

    #[test]
    fn persistent_raises_detection() {
        let mut ep = ArqEndpoint::default();
        ep.send(POS);
        assert_eq!(arq_on_delivery_status(&mut ep, DecodeStatus::DetectedUncorrectable), ArqAction::Retransmit);
        assert_eq!(
            arq_on_delivery_status(&mut ep, DecodeStatus::DetectedUncorrectable),
            ArqAction::RetransmitAndDetect(POS)
        );
    }
}

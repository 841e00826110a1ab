// SPDX-License-Identifier: Apache-2.0
//! Router building blocks: RAB input buffers, PCR pipeline stages, BLoD
//! crossbar, per-channel ARQ, the DDRM controller and switch allocation.

pub mod allocator;
pub mod arq;
pub mod blod;
pub mod ddrm;
pub mod pcr;
pub mod rab;

pub use allocator::{sa_arbitrate, GrantMask, InputMask, SwitchAllocator};
pub use arq::{arq_on_delivery_status, ArqAction, ArqEndpoint, BufferPosition};
pub use blod::{BlodCrossbar, XbarPath};
pub use ddrm::{ddrm_step, DdrmCommand, DdrmObservation, DdrmState, PROBE_LEN};
pub use pcr::{pcr_execute, PcrOutcome, PcrStage, SoftErrorHooks};
pub use rab::RabBuffer;

use crate::codec::{flit_pack, PackedFlit};
use crate::fault::HardFault;
use crate::model::{Direction, Flit};

/// Move a flit read from a buffer slot (`read`, the stored image of
/// `stored`) from `input` to `output`, writing the look-ahead port into the
/// header. The merge XORs the field and check-bit deltas into the word, so
/// corruption picked up in the slot stays visible to the downstream decoder.
/// Stuck lanes on the primary path are applied; mapped bypasses are fault
/// free.
pub fn crossbar_traverse<'a>(
    xbar: &BlodCrossbar,
    input: Direction,
    output: Direction,
    read: PackedFlit,
    stored: &Flit,
    next_port: Option<Direction>,
    primary_faults: impl IntoIterator<Item = &'a HardFault>,
) -> (PackedFlit, XbarPath) {
    let mut word = read;
    if let Some(p) = next_port {
        let mut merged = *stored;
        merged.next_port = p;
        word = word.xor(flit_pack(&merged).0 ^ flit_pack(stored).0);
    }
    let path = xbar.path(input, output);
    if path == XbarPath::Primary {
        for fault in primary_faults {
            word = fault.apply(word);
        }
    }
    (word, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{flit_pack, flit_unpack};
    use crate::fault::FaultTarget;
    use crate::model::{Coord3, FlitKind};

    #[test]
    fn merge_and_reencode() {
        let mut f = Flit::zero();
        f.kind = FlitKind::Header;
        f.destination = Coord3::new(2, 1, 3);
        let x = BlodCrossbar::new(2);
        let (w, path) = crossbar_traverse(&x, Direction::West, Direction::East, flit_pack(&f), &f, Some(Direction::Up), []);
        assert_eq!(path, XbarPath::Primary);
        let u = flit_unpack(w, 0, 0);
        assert_eq!(u.status(), crate::codec::DecodeStatus::Clean);
        assert_eq!(u.flit.next_port, Direction::Up);
    }

    #[test]
    fn bypass_skips_primary_faults() {
        let f = Flit::zero();
        let fault = HardFault {
            target: FaultTarget::CrossbarPath { router: Coord3::new(0, 0, 0), input: Direction::West, output: Direction::East },
            stuck_at: 1,
            bits: vec![0, 1],
            onset_cycle: 0,
        };
        let mut x = BlodCrossbar::new(1);
        let (w, _) = crossbar_traverse(&x, Direction::West, Direction::East, flit_pack(&f), &f, None, [&fault]);
        assert!(flit_unpack(w, 0, 0).status().is_uncorrectable());
        x.mark_faulty(Direction::West, Direction::East);
        let (w, path) = crossbar_traverse(&x, Direction::West, Direction::East, flit_pack(&f), &f, None, [&fault]);
        assert_eq!(path, XbarPath::Bypass(0));
        assert_eq!(flit_unpack(w, 0, 0).status(), crate::codec::DecodeStatus::Clean);
    }

    #[test]
    fn merge_keeps_slot_corruption_visible() {
        let f = Flit::zero();
        let read = flit_pack(&f).xor(0b11 << 3);
        let x = BlodCrossbar::new(0);
        let (w, _) = crossbar_traverse(&x, Direction::West, Direction::East, read, &f, Some(Direction::North), []);
        assert!(flit_unpack(w, 0, 0).status().is_uncorrectable());
    }
}

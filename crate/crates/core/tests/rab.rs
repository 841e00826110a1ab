// SPDX-License-Identifier: Apache-2.0

use std::collections::VecDeque;

use noc3d::router::RabBuffer;
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Write,
    Read,
    Flag(usize),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![4 => Just(Op::Write), 4 => Just(Op::Read), 1 => (0usize..4).prop_map(Op::Flag)],
        0..200,
    )
}

proptest! {
    /// Against a plain queue model: reads come out in write order, flagged
    /// slots are never written again, and occupancy never exceeds the
    /// healthy slot count.
    #[test]
    fn fifo_over_healthy_slots(ops in ops()) {
        let mut rab = RabBuffer::new(4);
        let mut model: VecDeque<u32> = VecDeque::new();
        let mut next = 0u32;
        for op in ops {
            match op {
                Op::Write => {
                    if rab.free_slots() > 0 {
                        let slot = rab.write(next);
                        prop_assert!(!rab.is_flagged(slot));
                        model.push_back(next);
                        next += 1;
                    }
                }
                Op::Read => {
                    let got = rab.pop_front().map(|(_, v)| v);
                    prop_assert_eq!(got, model.pop_front());
                }
                Op::Flag(s) => {
                    if rab.healthy_slots() > 1 {
                        if let Some(v) = rab.flag(s) {
                            model.retain(|&m| m != v);
                        }
                    }
                }
            }
            prop_assert!(rab.len() <= rab.healthy_slots());
            prop_assert_eq!(rab.len(), model.len());
            prop_assert!(rab.iter().all(|(slot, _)| !rab.is_flagged(slot)));
        }
    }
}

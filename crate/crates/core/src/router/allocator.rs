// SPDX-License-Identifier: Apache-2.0
//! Round-robin switch allocator with wormhole output holding.

use crate::model::Direction;

/// Bit `i` set means input port `i` requests the output.
pub type InputMask = u8;

/// One-hot (or empty) set of outputs granted to a single input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GrantMask(pub u8);

impl GrantMask {
    pub fn single(d: Direction) -> Self {
        GrantMask(1 << d.index())
    }

    /// The granted output when exactly one bit is set.
    pub fn output(self) -> Option<Direction> {
        (self.0.count_ones() == 1).then(|| Direction::from_index(self.0.trailing_zeros() as usize)).flatten()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SwitchAllocator {
    /// Per output: input port with highest priority next.
    pointers: [usize; 7],
    /// Per output: input holding it until its packet's tail traverses.
    holders: [Option<Direction>; 7],
}

impl SwitchAllocator {
    pub fn holder(&self, output: Direction) -> Option<Direction> {
        self.holders[output.index()]
    }

    pub fn hold(&mut self, output: Direction, input: Direction) {
        debug_assert!(self.holders[output.index()].is_none_or(|h| h == input));
        self.holders[output.index()] = Some(input);
    }

    pub fn release(&mut self, output: Direction) {
        self.holders[output.index()] = None;
    }

    pub fn pointer(&self, output: Direction) -> usize {
        self.pointers[output.index()]
    }

    /// Grant per output; pure over the current pointer and holder state so
    /// it can be evaluated redundantly.
    pub fn arbitrate(&self, requests: &[InputMask; 7]) -> [Option<Direction>; 7] {
        let mut grants = [None; 7];
        for (o, &req) in requests.iter().enumerate() {
            if req == 0 {
                continue;
            }
            grants[o] = match self.holders[o] {
                Some(h) => (req >> h.index() & 1 == 1).then_some(h),
                None => (0..7)
                    .map(|k| (self.pointers[o] + k) % 7)
                    .find(|&i| req >> i & 1 == 1)
                    .and_then(Direction::from_index),
            };
        }
        grants
    }

    /// Advance rotation past each newly granted (non-holding) winner.
    pub fn commit(&mut self, output: Direction, winner: Direction) {
        if self.holders[output.index()].is_none() {
            self.pointers[output.index()] = (winner.index() + 1) % 7;
        }
    }

    pub fn grant_for(grants: &[Option<Direction>; 7], input: Direction) -> GrantMask {
        GrantMask(
            grants
                .iter()
                .enumerate()
                .filter(|(_, g)| **g == Some(input))
                .fold(0u8, |m, (o, _)| m | 1 << o),
        )
    }
}

/// Free-function form: arbitrate and commit in one step.
pub fn sa_arbitrate(requests: &[InputMask; 7], state: &mut SwitchAllocator) -> [Option<Direction>; 7] {
    let grants = state.arbitrate(requests);
    for (o, g) in grants.iter().enumerate() {
        if let (Some(w), Some(out)) = (g, Direction::from_index(o)) {
            state.commit(out, *w);
        }
    }
    grants
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    fn req(out: Direction, inputs: &[Direction]) -> [InputMask; 7] {
        let mut r = [0; 7];
        r[out.index()] = inputs.iter().fold(0, |m, d| m | 1 << d.index());
        r
    }

    #[test]
    fn single_requester_granted() {
        let mut sa = SwitchAllocator::default();
        assert_eq!(sa_arbitrate(&req(East, &[North]), &mut sa)[East.index()], Some(North));
    }

    #[test]
    fn rotation_alternates() {
        let mut sa = SwitchAllocator::default();
        let r = req(East, &[West, North]);
        assert_eq!(sa_arbitrate(&r, &mut sa)[East.index()], Some(West));
        assert_eq!(sa_arbitrate(&r, &mut sa)[East.index()], Some(North));
        assert_eq!(sa_arbitrate(&r, &mut sa)[East.index()], Some(West));
    }

    #[test]
    fn holder_retains_port() {
        let mut sa = SwitchAllocator::default();
        sa.hold(East, South);
        assert_eq!(sa_arbitrate(&req(East, &[West]), &mut sa)[East.index()], None);
        assert_eq!(sa_arbitrate(&req(East, &[West, South]), &mut sa)[East.index()], Some(South));
        sa.release(East);
        assert_eq!(sa_arbitrate(&req(East, &[West]), &mut sa)[East.index()], Some(West));
    }

    #[test]
    fn grant_mask_round_trip() {
        let mut g = [None; 7];
        g[Up.index()] = Some(Local);
        let m = SwitchAllocator::grant_for(&g, Local);
        assert_eq!(m.output(), Some(Up));
        assert_eq!(GrantMask(0b11).output(), None);
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Bypass-Link-on-Demand crossbar bookkeeping.

use crate::model::Direction;

/// Which physical path a traversal uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XbarPath {
    Primary,
    Bypass(usize),
}

#[derive(Debug, Clone)]
pub struct BlodCrossbar {
    /// Primary (input, output) links known to be faulty.
    faulty: [[bool; 7]; 7],
    bypass_pool: Vec<Option<(Direction, Direction)>>,
    escalations: [u8; 7],
}

impl BlodCrossbar {
    pub fn new(bypass_links: usize) -> Self {
        BlodCrossbar { faulty: [[false; 7]; 7], bypass_pool: vec![None; bypass_links], escalations: [0; 7] }
    }

    pub fn pool_size(&self) -> usize {
        self.bypass_pool.len()
    }

    pub fn available_bypasses(&self) -> usize {
        self.bypass_pool.iter().filter(|b| b.is_none()).count()
    }

    pub fn mapped(&self) -> impl Iterator<Item = (usize, Direction, Direction)> + '_ {
        self.bypass_pool.iter().enumerate().filter_map(|(k, b)| b.map(|(i, o)| (k, i, o)))
    }

    pub fn bypass_for(&self, input: Direction, output: Direction) -> Option<usize> {
        self.bypass_pool.iter().position(|b| *b == Some((input, output)))
    }

    pub fn is_primary_faulty(&self, input: Direction, output: Direction) -> bool {
        self.faulty[input.index()][output.index()]
    }

    pub fn is_serviceable(&self, input: Direction, output: Direction) -> bool {
        !self.is_primary_faulty(input, output) || self.bypass_for(input, output).is_some()
    }

    /// Path a flit from `input` to `output` would take now.
    pub fn path(&self, input: Direction, output: Direction) -> XbarPath {
        match self.bypass_for(input, output) {
            Some(k) => XbarPath::Bypass(k),
            None => XbarPath::Primary,
        }
    }

    /// Map a free bypass over (input, output). Returns the bypass index, or
    /// `None` when the pool is exhausted.
    pub fn map_bypass(&mut self, input: Direction, output: Direction) -> Option<usize> {
        if let Some(k) = self.bypass_for(input, output) {
            return Some(k);
        }
        let k = self.bypass_pool.iter().position(Option::is_none)?;
        self.bypass_pool[k] = Some((input, output));
        Some(k)
    }

    pub fn release_bypass(&mut self, input: Direction, output: Direction) {
        if let Some(k) = self.bypass_for(input, output) {
            self.bypass_pool[k] = None;
        }
    }

    /// Disable a faulty primary path: map a bypass when one is free, else
    /// raise an escalation on the output. Returns whether a bypass covers it.
    pub fn mark_faulty(&mut self, input: Direction, output: Direction) -> bool {
        self.faulty[input.index()][output.index()] = true;
        if self.map_bypass(input, output).is_some() {
            true
        } else {
            self.escalate(output);
            false
        }
    }

    pub fn escalate(&mut self, output: Direction) {
        self.escalations[output.index()] += 1;
    }

    pub fn escalation_flags(&self) -> usize {
        self.escalations.iter().map(|&e| e as usize).sum()
    }

    pub fn is_escalated(&self, output: Direction) -> bool {
        self.escalations[output.index()] > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    #[test]
    fn bypass_covers_within_pool() {
        let mut x = BlodCrossbar::new(2);
        assert!(x.mark_faulty(East, West));
        assert!(x.mark_faulty(North, South));
        assert!(x.is_serviceable(East, West));
        assert!(x.is_serviceable(North, South));
        assert_eq!(x.escalation_flags(), 0);
        assert_eq!(x.path(East, West), XbarPath::Bypass(0));
        assert_eq!(x.path(Up, West), XbarPath::Primary);
    }

    #[test]
    fn escalations_count_excess_faults() {
        let mut x = BlodCrossbar::new(2);
        let paths = [(East, West), (North, South), (Up, Down), (Local, East), (West, North)];
        for (i, o) in paths {
            x.mark_faulty(i, o);
        }
        assert_eq!(x.escalation_flags(), paths.len() - 2);
        assert!(!x.is_serviceable(Up, Down));
    }

    #[test]
    fn release_frees_pool() {
        let mut x = BlodCrossbar::new(1);
        assert_eq!(x.map_bypass(East, West), Some(0));
        assert_eq!(x.map_bypass(North, West), None);
        x.release_bypass(East, West);
        assert_eq!(x.available_bypasses(), 1);
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Random Access Buffer: an input FIFO whose cursors skip flagged slots.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Slot<T> {
    fault_flag: bool,
    item: Option<T>,
}

#[derive(Debug, Clone)]
pub struct RabBuffer<T> {
    slots: Vec<Slot<T>>,
    /// Occupied slot indices, oldest first.
    order: VecDeque<usize>,
    write_cursor: usize,
}

impl<T> RabBuffer<T> {
    pub fn new(depth: usize) -> Self {
        assert!(depth > 0);
        RabBuffer {
            slots: (0..depth).map(|_| Slot { fault_flag: false, item: None }).collect(),
            order: VecDeque::with_capacity(depth),
            write_cursor: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn healthy_slots(&self) -> usize {
        self.slots.iter().filter(|s| !s.fault_flag).count()
    }

    /// Healthy slots not holding a flit.
    pub fn free_slots(&self) -> usize {
        self.healthy_slots() - self.order.len()
    }

    pub fn is_flagged(&self, slot: usize) -> bool {
        self.slots[slot].fault_flag
    }

    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.fault_flag).map(|(i, _)| i)
    }

    pub fn write_cursor(&self) -> usize {
        self.write_cursor
    }

    /// Slot the next read would come from.
    pub fn read_cursor(&self) -> Option<usize> {
        self.order.front().copied()
    }

    /// Store `item` in the next healthy free slot at or after the write
    /// cursor. Overflow is a flow-control bug and panics.
    pub fn write(&mut self, item: T) -> usize {
        let depth = self.depth();
        let slot = (0..depth)
            .map(|k| (self.write_cursor + k) % depth)
            .find(|&i| !self.slots[i].fault_flag && self.slots[i].item.is_none())
            .expect("RAB overflow: write with no healthy free slot");
        self.slots[slot].item = Some(item);
        self.order.push_back(slot);
        self.write_cursor = (slot + 1) % depth;
        slot
    }

    /// Entry `pos` places from the front of the queue.
    pub fn get(&self, pos: usize) -> Option<(usize, &T)> {
        let slot = *self.order.get(pos)?;
        self.slots[slot].item.as_ref().map(|t| (slot, t))
    }

    pub fn get_mut(&mut self, pos: usize) -> Option<(usize, &mut T)> {
        let slot = *self.order.get(pos)?;
        self.slots[slot].item.as_mut().map(|t| (slot, t))
    }

    /// Occupant of `slot`, regardless of its queue position.
    pub fn slot(&self, slot: usize) -> Option<&T> {
        self.slots.get(slot).and_then(|s| s.item.as_ref())
    }

    pub fn slot_mut(&mut self, slot: usize) -> Option<&mut T> {
        self.slots.get_mut(slot).and_then(|s| s.item.as_mut())
    }

    pub fn front(&self) -> Option<(usize, &T)> {
        self.get(0)
    }

    pub fn pop_front(&mut self) -> Option<(usize, T)> {
        let slot = self.order.pop_front()?;
        let item = self.slots[slot].item.take().expect("ordered slot must be occupied");
        Some((slot, item))
    }

    /// Remove the entry stored in `slot`, wherever it sits in the order.
    pub fn take_slot(&mut self, slot: usize) -> Option<T> {
        let pos = self.order.iter().position(|&s| s == slot)?;
        self.order.remove(pos);
        self.slots[slot].item.take()
    }

    /// Flag `slot` as permanently faulty. Any occupant is handed back to the
    /// caller; the slot is never read or written again.
    pub fn flag(&mut self, slot: usize) -> Option<T> {
        let occupant = self.take_slot(slot);
        self.slots[slot].fault_flag = true;
        occupant
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &T)> + '_ {
        self.order.iter().filter_map(move |&s| self.slots[s].item.as_ref().map(|t| (s, t)))
    }

    /// Drop entries matching `pred`, keeping the order of the rest.
    pub fn retain(&mut self, mut keep: impl FnMut(&T) -> bool) -> usize {
        let mut removed = 0;
        let slots = &mut self.slots;
        self.order.retain(|&s| {
            let k = slots[s].item.as_ref().is_some_and(&mut keep);
            if !k {
                slots[s].item = None;
                removed += 1;
            }
            k
        });
        removed
    }
}

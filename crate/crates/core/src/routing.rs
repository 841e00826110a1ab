// SPDX-License-Identifier: Apache-2.0
//! Next-port computation: look-ahead fault-tolerant adaptive routing (LAFT)
//! and dimension-order XYZ.
//!
//! Both functions answer "which output will the router at `next_node` use",
//! so the upstream router can merge the answer into the header before the
//! flit leaves.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{neighbor, Coord3, Dims, Direction};

/// Link health seen from one node. `links[d]` is true when output `d` of the
/// node is unusable (faulty or leaving the mesh). `neighbor_links[d]` is the
/// same map for the node reached through `d`, all-faulty when absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkFaultView {
    pub links: [bool; 7],
    pub neighbor_links: [[bool; 7]; 7],
}

impl LinkFaultView {
    /// Only the mesh boundary is unusable.
    pub fn healthy(node: Coord3, dims: Dims) -> Self {
        Self::from_fn(node, dims, |_, _| false)
    }

    /// Build a view from a predicate `faulty(node, dir)` over known faults.
    pub fn from_fn(node: Coord3, dims: Dims, faulty: impl Fn(Coord3, Direction) -> bool) -> Self {
        let row = |c: Coord3| {
            let mut r = [true; 7];
            for d in Direction::MESH {
                r[d.index()] = neighbor(c, d, dims).is_none() || faulty(c, d);
            }
            r
        };
        let mut neighbor_links = [[true; 7]; 7];
        for d in Direction::MESH {
            if let Some(n) = neighbor(node, d, dims) {
                neighbor_links[d.index()] = row(n);
            }
        }
        LinkFaultView { links: row(node), neighbor_links }
    }

    pub fn is_faulty(&self, d: Direction) -> bool {
        d.is_local() || self.links[d.index()]
    }

    pub fn mark(&mut self, d: Direction) {
        self.links[d.index()] = true;
    }
}

/// Free input-buffer slots downstream of each output of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CongestionView {
    pub free_slots: [usize; 7],
}

impl CongestionView {
    pub fn uniform(free: usize) -> Self {
        CongestionView { free_slots: [free; 7] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingDecision {
    pub chosen: Direction,
    pub minimal: bool,
    pub candidates_considered: Vec<Direction>,
}

impl RoutingDecision {
    fn local() -> Self {
        RoutingDecision { chosen: Direction::Local, minimal: true, candidates_considered: Vec::new() }
    }
}

/// Axis directions that strictly shorten the distance from `from` to `to`.
pub fn minimal_dirs(from: Coord3, to: Coord3) -> Vec<Direction> {
    let mut v = Vec::with_capacity(3);
    if to.x > from.x {
        v.push(Direction::East);
    } else if to.x < from.x {
        v.push(Direction::West);
    }
    if to.y > from.y {
        v.push(Direction::North);
    } else if to.y < from.y {
        v.push(Direction::South);
    }
    if to.z > from.z {
        v.push(Direction::Up);
    } else if to.z < from.z {
        v.push(Direction::Down);
    }
    v
}

/// Number of minimal continuations left after stepping from `node` through
/// `d`; zero when the step reaches `dest` or leaves the mesh.
pub fn diversity_score(node: Coord3, d: Direction, dest: Coord3, dims: Dims) -> usize {
    neighbor(node, d, dims).map_or(0, |n| minimal_dirs(n, dest).len())
}

/// Diversity counting only continuations the landing node can actually use.
fn usable_diversity(node: Coord3, d: Direction, dest: Coord3, dims: Dims, view: &LinkFaultView) -> usize {
    let Some(n) = neighbor(node, d, dims) else { return 0 };
    let row = &view.neighbor_links[d.index()];
    minimal_dirs(n, dest).into_iter().filter(|c| !row[c.index()]).count()
}

fn select(
    node: Coord3,
    dest: Coord3,
    dims: Dims,
    candidates: &[Direction],
    faults: &LinkFaultView,
    congestion: &CongestionView,
) -> Option<Direction> {
    // Direction order breaks remaining ties: the first maximum wins.
    let mut best: Option<(Direction, (usize, usize))> = None;
    for &d in candidates {
        let key = (usable_diversity(node, d, dest, dims, faults), congestion.free_slots[d.index()]);
        if best.is_none_or(|(_, k)| key > k) {
            best = Some((d, key));
        }
    }
    best.map(|(d, _)| d)
}

/// LAFT decision for the router at `next_node`.
///
/// `arrival` is the direction the flit travels to reach `next_node`; its
/// inverse is excluded from the non-minimal fallback.
pub fn laft_next_port(
    next_node: Coord3,
    dest: Coord3,
    faults: &LinkFaultView,
    congestion: &CongestionView,
    arrival: Option<Direction>,
    dims: Dims,
) -> Result<RoutingDecision> {
    if next_node == dest {
        return Ok(RoutingDecision::local());
    }
    let minimal: Vec<Direction> =
        minimal_dirs(next_node, dest).into_iter().filter(|&d| !faults.is_faulty(d)).collect();
    if let Some(chosen) = select(next_node, dest, dims, &minimal, faults, congestion) {
        return Ok(RoutingDecision { chosen, minimal: true, candidates_considered: minimal });
    }
    let back = arrival.map(Direction::inverse);
    let fallback: Vec<Direction> = Direction::MESH
        .into_iter()
        .filter(|&d| !faults.is_faulty(d) && Some(d) != back)
        .collect();
    match select(next_node, dest, dims, &fallback, faults, congestion) {
        Some(chosen) => Ok(RoutingDecision { chosen, minimal: false, candidates_considered: fallback }),
        None => Err(Error::NoRoute { node: next_node, dest }),
    }
}

/// Dimension-order routing: x, then y, then z. Ignores faults.
pub fn xyz_next_port(next_node: Coord3, dest: Coord3) -> RoutingDecision {
    let chosen = minimal_dirs(next_node, dest).first().copied().unwrap_or(Direction::Local);
    RoutingDecision { chosen, minimal: true, candidates_considered: vec![chosen] }
}

/// One trace line per decision.
pub fn trace_line(node: Coord3, dest: Coord3, decision: &RoutingDecision, dims: Dims) -> String {
    let mut s = format!("route node={node} dest={dest} cands=[");
    for (i, d) in decision.candidates_considered.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{d}:{}", diversity_score(node, *d, dest, dims));
    }
    let _ = write!(s, "] choice={} minimal={}", decision.chosen, decision.minimal);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    const D4: Dims = Dims::new(4, 4, 4);

    fn c(x: usize, y: usize, z: usize) -> Coord3 {
        Coord3::new(x, y, z)
    }

    #[test]
    fn minimal_dirs_examples() {
        assert_eq!(minimal_dirs(c(0, 0, 0), c(2, 1, 0)), vec![East, North]);
        assert!(minimal_dirs(c(1, 1, 1), c(1, 1, 1)).is_empty());
        assert_eq!(minimal_dirs(c(3, 3, 3), c(0, 0, 0)), vec![West, South, Down]);
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity_score(c(0, 0, 0), East, c(2, 2, 0), D4), 2);
        assert_eq!(diversity_score(c(0, 0, 0), East, c(1, 0, 0), D4), 0);
        assert_eq!(diversity_score(c(0, 0, 0), North, c(2, 2, 0), D4), 2);
    }

    #[test]
    fn laft_examples() {
        let cong = CongestionView::uniform(4);
        let n = c(1, 1, 0);
        let d = laft_next_port(n, n, &LinkFaultView::healthy(n, D4), &cong, None, D4).unwrap();
        assert_eq!(d.chosen, Local);

        let o = c(0, 0, 0);
        let view = LinkFaultView::healthy(o, D4);
        let d = laft_next_port(o, c(2, 2, 0), &view, &cong, None, D4).unwrap();
        assert_eq!(d.chosen, East);
        assert!(d.minimal);

        let mut view = LinkFaultView::healthy(o, D4);
        view.mark(East);
        let d = laft_next_port(o, c(2, 2, 0), &view, &cong, None, D4).unwrap();
        assert_eq!(d.chosen, North);
    }

    #[test]
    fn congestion_breaks_diversity_tie() {
        let o = c(0, 0, 0);
        let mut cong = CongestionView::uniform(2);
        cong.free_slots[North.index()] = 3;
        let d = laft_next_port(o, c(2, 2, 0), &LinkFaultView::healthy(o, D4), &cong, None, D4).unwrap();
        assert_eq!(d.chosen, North);
    }

    #[test]
    fn fallback_is_non_minimal_and_avoids_u_turn() {
        let o = c(1, 1, 1);
        let mut view = LinkFaultView::healthy(o, D4);
        view.mark(East);
        let cong = CongestionView::uniform(4);
        // Arrived travelling East (from the West side): no West U-turn.
        let d = laft_next_port(o, c(2, 1, 1), &view, &cong, Some(East), D4).unwrap();
        assert!(!d.minimal);
        assert_ne!(d.chosen, West);
        assert_ne!(d.chosen, East);
    }

    #[test]
    fn isolated_node_has_no_route() {
        let o = c(0, 0, 0);
        let mut view = LinkFaultView::healthy(o, D4);
        for d in [East, North, Up] {
            view.mark(d);
        }
        let r = laft_next_port(o, c(3, 3, 3), &view, &CongestionView::uniform(4), None, D4);
        assert!(matches!(r, Err(Error::NoRoute { .. })));
    }

    #[test]
    fn xyz_examples() {
        assert_eq!(xyz_next_port(c(0, 0, 0), c(2, 1, 1)).chosen, East);
        assert_eq!(xyz_next_port(c(2, 0, 0), c(2, 1, 1)).chosen, North);
        assert_eq!(xyz_next_port(c(2, 1, 0), c(2, 1, 1)).chosen, Up);
        assert_eq!(xyz_next_port(c(2, 1, 1), c(2, 1, 1)).chosen, Local);
    }
}

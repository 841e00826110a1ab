// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashSet, VecDeque};

use noc3d::model::neighbor;
use noc3d::routing::*;
use noc3d::selftest::laft_path;
use noc3d::{Coord3, Dims, Direction};
use proptest::prelude::*;

/// Hop distances from `src` by breadth-first search over the mesh graph.
fn bfs_distance(dims: Dims, src: Coord3, dst: Coord3) -> usize {
    let mut seen = HashSet::from([src]);
    let mut q = VecDeque::from([(src, 0)]);
    while let Some((c, d)) = q.pop_front() {
        if c == dst {
            return d;
        }
        for dir in Direction::MESH {
            if let Some(n) = neighbor(c, dir, dims) {
                if seen.insert(n) {
                    q.push_back((n, d + 1));
                }
            }
        }
    }
    unreachable!("mesh is connected")
}

#[test]
fn fault_free_routes_are_shortest() {
    let dims = Dims::new(3, 3, 3);
    for s in dims.coords() {
        for d in dims.coords() {
            let p = laft_path(dims, s, d);
            assert_eq!(p.len() - 1, bfs_distance(dims, s, d), "{s} -> {d}");
            assert!(p.iter().all(|h| h.2.is_local() || minimal_dirs(h.0, d).contains(&h.2)));
        }
    }
}

fn dims3() -> impl Strategy<Value = Dims> {
    (1usize..6, 1usize..6, 1usize..5).prop_map(|(x, y, z)| Dims::new(x, y, z))
}

fn scenario() -> impl Strategy<Value = (Dims, Coord3, Coord3, u64, [usize; 7], Option<Direction>)> {
    dims3().prop_flat_map(|d| {
        let c = move || (0..d.x, 0..d.y, 0..d.z).prop_map(|(x, y, z)| Coord3::new(x, y, z));
        (
            Just(d),
            c(),
            c(),
            any::<u64>(),
            prop::array::uniform7(0usize..5),
            prop::option::of((1usize..7).prop_map(|i| Direction::from_index(i).unwrap())),
        )
    })
}

/// A fault pattern drawn from the bits of `mask`, one bit per (node, dir).
fn view(node: Coord3, dims: Dims, mask: u64) -> LinkFaultView {
    LinkFaultView::from_fn(node, dims, |c, d| {
        let k = (dims.index_of(c) * 6 + d.index()) % 64;
        mask >> k & 1 == 1
    })
}

proptest! {
    #[test]
    fn never_picks_a_faulty_link((dims, node, dest, mask, free, arrival) in scenario()) {
        let v = view(node, dims, mask);
        let cong = CongestionView { free_slots: free };
        match laft_next_port(node, dest, &v, &cong, arrival, dims) {
            Ok(r) => {
                prop_assert_eq!(r.chosen.is_local(), node == dest);
                if node != dest {
                    prop_assert!(!v.is_faulty(r.chosen));
                    prop_assert!(neighbor(node, r.chosen, dims).is_some());
                    let usable_min = minimal_dirs(node, dest).into_iter().any(|d| !v.is_faulty(d));
                    prop_assert_eq!(r.minimal, usable_min);
                    if !r.minimal {
                        prop_assert_ne!(Some(r.chosen), arrival.map(Direction::inverse));
                    }
                }
            }
            Err(_) => {
                let back = arrival.map(Direction::inverse);
                prop_assert!(Direction::MESH.into_iter().all(|d| v.is_faulty(d) || Some(d) == back));
            }
        }
    }

    #[test]
    fn deterministic_and_scale_invariant((dims, node, dest, mask, free, arrival) in scenario(), k in 1usize..5) {
        let v = view(node, dims, mask);
        let a = laft_next_port(node, dest, &v, &CongestionView { free_slots: free }, arrival, dims).ok().map(|r| r.chosen);
        let b = laft_next_port(node, dest, &v, &CongestionView { free_slots: free }, arrival, dims).ok().map(|r| r.chosen);
        let scaled = free.map(|f| f * k);
        let c = laft_next_port(node, dest, &v, &CongestionView { free_slots: scaled }, arrival, dims).ok().map(|r| r.chosen);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, c);
    }

    #[test]
    fn minimal_dirs_shrink_distance((dims, a, b, _m, _f, _a) in scenario()) {
        let dirs = minimal_dirs(a, b);
        prop_assert_eq!(dirs.is_empty(), a == b);
        for d in dirs {
            let n = neighbor(a, d, dims).unwrap();
            prop_assert_eq!(bfs_distance(dims, n, b) + 1, bfs_distance(dims, a, b));
        }
    }
}

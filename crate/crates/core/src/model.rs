// SPDX-License-Identifier: Apache-2.0
//! Mesh topology, addressing, packets, flits and network configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest extent supported on any axis (3 destination bits per axis).
pub const MAX_AXIS: usize = 8;

/// Payload bits carried by every flit.
pub const PAYLOAD_BITS: u32 = 18;

/// Grid coordinate of a router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord3 {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Coord3 {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub fn manhattan(self, other: Coord3) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) + self.z.abs_diff(other.z)
    }
}

impl fmt::Display for Coord3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// Router port. The discriminant is the 3-bit wire encoding and also the
/// tie-break order used by routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Direction {
    Local = 0,
    East = 1,
    West = 2,
    North = 3,
    South = 4,
    Up = 5,
    Down = 6,
}

impl Direction {
    pub const ALL: [Direction; 7] = [
        Direction::Local,
        Direction::East,
        Direction::West,
        Direction::North,
        Direction::South,
        Direction::Up,
        Direction::Down,
    ];

    /// The six inter-router ports, in tie-break order.
    pub const MESH: [Direction; 6] = [
        Direction::East,
        Direction::West,
        Direction::North,
        Direction::South,
        Direction::Up,
        Direction::Down,
    ];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Self::ALL.get(i).copied()
    }

    /// Opposing port: the downstream input a flit sent on `self` arrives at.
    ///
    /// Panics on `Local`, which has no opposite.
    pub fn inverse(self) -> Direction {
        match self {
            Direction::East => Direction::West,
            Direction::West => Direction::East,
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Local => panic!("Local port has no inverse"),
        }
    }

    pub fn is_local(self) -> bool {
        self == Direction::Local
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::Local => "L",
            Direction::East => "E",
            Direction::West => "W",
            Direction::North => "N",
            Direction::South => "S",
            Direction::Up => "U",
            Direction::Down => "D",
        };
        f.write_str(s)
    }
}

/// Free-function form of [`Direction::inverse`].
pub fn direction_inverse(d: Direction) -> Direction {
    d.inverse()
}

/// Mesh extents. Serialized as `"XxYxZ"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Dims {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub fn node_count(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn contains(&self, c: Coord3) -> bool {
        c.x < self.x && c.y < self.y && c.z < self.z
    }

    pub fn index_of(&self, c: Coord3) -> usize {
        debug_assert!(self.contains(c));
        (c.z * self.y + c.y) * self.x + c.x
    }

    pub fn coord_of(&self, i: usize) -> Coord3 {
        let x = i % self.x;
        let y = (i / self.x) % self.y;
        let z = i / (self.x * self.y);
        Coord3::new(x, y, z)
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord3> + '_ {
        (0..self.node_count()).map(|i| self.coord_of(i))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("x", self.x), ("y", self.y), ("z", self.z)] {
            if v == 0 || v > MAX_AXIS {
                return Err(Error::Config(format!(
                    "dims.{name} = {v} outside 1..={MAX_AXIS}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

impl FromStr for Dims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("dims '{s}' is not of the form XxYxZ")));
        }
        let mut v = [0usize; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("dims '{s}': '{p}' is not an integer")))?;
        }
        let d = Dims::new(v[0], v[1], v[2]);
        d.validate()?;
        Ok(d)
    }
}

impl TryFrom<String> for Dims {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Dims> for String {
    fn from(d: Dims) -> String {
        d.to_string()
    }
}

/// Adjacent coordinate in direction `d`, or `None` for `Local` and mesh edges.
pub fn neighbor(c: Coord3, d: Direction, dims: Dims) -> Option<Coord3> {
    let Coord3 { x, y, z } = c;
    let n = match d {
        Direction::Local => return None,
        Direction::East => Coord3::new(x + 1, y, z),
        Direction::West => Coord3::new(x.checked_sub(1)?, y, z),
        Direction::North => Coord3::new(x, y + 1, z),
        Direction::South => Coord3::new(x, y.checked_sub(1)?, z),
        Direction::Up => Coord3::new(x, y, z + 1),
        Direction::Down => Coord3::new(x, y, z.checked_sub(1)?),
    };
    dims.contains(n).then_some(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlitKind {
    Header = 0,
    Body = 1,
    Tail = 2,
    HeaderTail = 3,
}

impl FlitKind {
    pub fn for_position(seq: usize, len: usize) -> FlitKind {
        match (seq == 0, seq + 1 == len) {
            (true, true) => FlitKind::HeaderTail,
            (true, false) => FlitKind::Header,
            (false, true) => FlitKind::Tail,
            (false, false) => FlitKind::Body,
        }
    }

    pub fn is_head(self) -> bool {
        matches!(self, FlitKind::Header | FlitKind::HeaderTail)
    }

    pub fn is_tail(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::HeaderTail)
    }

    pub fn from_bits(b: u32) -> FlitKind {
        match b & 0b11 {
            0 => FlitKind::Header,
            1 => FlitKind::Body,
            2 => FlitKind::Tail,
            _ => FlitKind::HeaderTail,
        }
    }
}

pub type PacketId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: PacketId,
    pub source: Coord3,
    pub destination: Coord3,
    pub length: usize,
    pub inject_cycle: u64,
}

/// Semantic (unpacked) flit. `packet_id` and `seq_index` are simulator
/// bookkeeping and are not part of the 44-bit wire image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flit {
    pub kind: FlitKind,
    pub next_port: Direction,
    pub destination: Coord3,
    pub payload: u32,
    pub packet_id: PacketId,
    pub seq_index: u16,
}

impl Flit {
    pub fn zero() -> Self {
        Flit {
            kind: FlitKind::Header,
            next_port: Direction::Local,
            destination: Coord3::new(0, 0, 0),
            payload: 0,
            packet_id: 0,
            seq_index: 0,
        }
    }

    /// Wire fields only; ignores simulator bookkeeping.
    pub fn same_wire_image(&self, other: &Flit) -> bool {
        self.kind == other.kind
            && self.next_port == other.next_port
            && self.destination == other.destination
            && self.payload == other.payload
    }
}

/// Routing algorithm used by the next-port computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingAlgorithm {
    Laft,
    Xyz,
}

impl FromStr for RoutingAlgorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laft" => Ok(RoutingAlgorithm::Laft),
            "xyz" => Ok(RoutingAlgorithm::Xyz),
            _ => Err(Error::Config(format!("unknown routing algorithm '{s}'"))),
        }
    }
}

/// The four systems compared in the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// LAFT routing, no fault tolerance.
    #[serde(rename = "baseline")]
    Baseline,
    /// Hard-fault tolerance only (RAB, BLoD, link marking).
    #[serde(rename = "3d-fto")]
    Fto,
    /// Soft-error tolerance only (PCR, SECDED + ARQ).
    #[serde(rename = "set")]
    Set,
    /// Both.
    #[serde(rename = "feto")]
    Feto,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Fto, Variant::Set, Variant::Feto];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Fto => "3d-fto",
            Variant::Set => "set",
            Variant::Feto => "feto",
        }
    }

    pub fn pcr(self) -> bool {
        matches!(self, Variant::Set | Variant::Feto)
    }

    pub fn ecc(self) -> bool {
        matches!(self, Variant::Set | Variant::Feto)
    }

    pub fn hard_ft(self) -> bool {
        matches!(self, Variant::Fto | Variant::Feto)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "3d-fto" | "fto" => Ok(Variant::Fto),
            "set" => Ok(Variant::Set),
            "feto" | "3d-feto" | "sher3dr" => Ok(Variant::Feto),
            _ => Err(Error::Config(format!("unknown variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub dims: Dims,
    pub buffer_depth: usize,
    pub bypass_links_per_router: usize,
    pub stop_threshold: usize,
    pub go_threshold: usize,
    pub pcr_enabled: bool,
    pub ecc_enabled: bool,
    /// RAB slot flagging, BLoD bypasses and link marking.
    pub hard_ft_enabled: bool,
    pub routing_algorithm: RoutingAlgorithm,
    pub rng_seed: u64,
    pub drain_timeout_cycles: u64,
    /// A header waiting this long for a grant is dropped as deadlocked.
    pub blocked_timeout_cycles: u64,
    /// A header stuck behind a held or stopped output this long tries
    /// another output; detours count against the misroute budget.
    pub detour_after_cycles: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            dims: Dims::new(4, 4, 4),
            buffer_depth: 4,
            bypass_links_per_router: 2,
            stop_threshold: 1,
            go_threshold: 2,
            pcr_enabled: true,
            ecc_enabled: true,
            hard_ft_enabled: true,
            routing_algorithm: RoutingAlgorithm::Laft,
            rng_seed: 1,
            drain_timeout_cycles: 20_000,
            blocked_timeout_cycles: 2_000,
            detour_after_cycles: 32,
        }
    }
}

impl NetworkConfig {
    pub fn for_variant(dims: Dims, variant: Variant) -> Self {
        NetworkConfig::default().with_dims(dims).with_variant(variant)
    }

    pub fn with_dims(mut self, dims: Dims) -> Self {
        self.dims = dims;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.pcr_enabled = variant.pcr();
        self.ecc_enabled = variant.ecc();
        self.hard_ft_enabled = variant.hard_ft();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn node_count(&self) -> usize {
        self.dims.node_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.buffer_depth < 2 {
            return Err(Error::Config(format!(
                "buffer_depth = {} must be at least 2",
                self.buffer_depth
            )));
        }
        if !(self.stop_threshold < self.go_threshold && self.go_threshold <= self.buffer_depth) {
            return Err(Error::Config(format!(
                "stop_threshold ({}) < go_threshold ({}) <= buffer_depth ({}) violated",
                self.stop_threshold, self.go_threshold, self.buffer_depth
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D4: Dims = Dims::new(4, 4, 4);

    #[test]
    fn neighbor_examples() {
        assert_eq!(
            neighbor(Coord3::new(1, 1, 1), Direction::East, D4),
            Some(Coord3::new(2, 1, 1))
        );
        assert_eq!(neighbor(Coord3::new(3, 0, 0), Direction::East, D4), None);
        assert_eq!(neighbor(Coord3::new(1, 1, 1), Direction::Local, D4), None);
        assert_eq!(neighbor(Coord3::new(0, 0, 0), Direction::Down, D4), None);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(direction_inverse(Direction::East), Direction::West);
        assert_eq!(direction_inverse(Direction::Up), Direction::Down);
        assert_eq!(direction_inverse(Direction::North), Direction::South);
    }

    #[test]
    #[should_panic]
    fn local_has_no_inverse() {
        let _ = Direction::Local.inverse();
    }

    #[test]
    fn adjacency_symmetric_and_degree_bounds() {
        for dims in [Dims::new(2, 2, 2), Dims::new(3, 3, 3), Dims::new(5, 5, 4)] {
            for c in dims.coords() {
                let mut deg = 0;
                for d in Direction::MESH {
                    if let Some(n) = neighbor(c, d, dims) {
                        deg += 1;
                        assert_eq!(neighbor(n, d.inverse(), dims), Some(c));
                    }
                }
                assert!((3..=6).contains(&deg), "{c} has degree {deg}");
            }
            assert_eq!(dims.coords().count(), dims.x * dims.y * dims.z);
        }
    }

    #[test]
    fn index_round_trip() {
        let d = Dims::new(5, 5, 4);
        for i in 0..d.node_count() {
            assert_eq!(d.index_of(d.coord_of(i)), i);
        }
    }

    #[test]
    fn dims_parse() {
        assert_eq!("4x4x4".parse::<Dims>().unwrap(), D4);
        assert!("4x4".parse::<Dims>().is_err());
        assert!("9x1x1".parse::<Dims>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(NetworkConfig::default().validate().is_ok());
        let mut c = NetworkConfig::default();
        c.go_threshold = 1;
        assert!(c.validate().is_err());
        c = NetworkConfig::default();
        c.buffer_depth = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kind_positions() {
        assert_eq!(FlitKind::for_position(0, 1), FlitKind::HeaderTail);
        assert_eq!(FlitKind::for_position(0, 3), FlitKind::Header);
        assert_eq!(FlitKind::for_position(1, 3), FlitKind::Body);
        assert_eq!(FlitKind::for_position(2, 3), FlitKind::Tail);
    }
}

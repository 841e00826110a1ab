// SPDX-License-Identifier: Apache-2.0
//! Synthetic and table-driven traffic sources.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coord3, Dims, NetworkConfig};

const MATRIX_TABLE: &str = include_str!("../assets/matrix_6x6x3.csv");
const H264_TABLE: &str = include_str!("../assets/h264_3x3x3.csv");
const VOPD_TABLE: &str = include_str!("../assets/vopd_3x2x2.csv");
const MWD_TABLE: &str = include_str!("../assets/mwd_2x2x3.csv");
const PIP_TABLE: &str = include_str!("../assets/pip_2x2x2.csv");

/// Serialized by name, `table:<path>` for external tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TrafficKind {
    Uniform,
    Transpose,
    Hotspot10,
    Matrix,
    H264,
    Vopd,
    Mwd,
    Pip,
    Table(PathBuf),
}

impl TrafficKind {
    pub const SYNTHETIC: [TrafficKind; 4] =
        [TrafficKind::Transpose, TrafficKind::Uniform, TrafficKind::Matrix, TrafficKind::Hotspot10];

    pub fn name(&self) -> String {
        match self {
            TrafficKind::Uniform => "uniform".into(),
            TrafficKind::Transpose => "transpose".into(),
            TrafficKind::Hotspot10 => "hotspot10".into(),
            TrafficKind::Matrix => "matrix".into(),
            TrafficKind::H264 => "h264".into(),
            TrafficKind::Vopd => "vopd".into(),
            TrafficKind::Mwd => "mwd".into(),
            TrafficKind::Pip => "pip".into(),
            TrafficKind::Table(p) => format!("table:{}", p.display()),
        }
    }

    /// Mesh the benchmark is defined on.
    pub fn default_dims(&self) -> Option<Dims> {
        Some(match self {
            TrafficKind::Uniform | TrafficKind::Transpose | TrafficKind::Hotspot10 => Dims::new(4, 4, 4),
            TrafficKind::Matrix => Dims::new(6, 6, 3),
            TrafficKind::H264 => Dims::new(3, 3, 3),
            TrafficKind::Vopd => Dims::new(3, 2, 2),
            TrafficKind::Mwd => Dims::new(2, 2, 3),
            TrafficKind::Pip => Dims::new(2, 2, 2),
            TrafficKind::Table(_) => return None,
        })
    }

    /// Packet budget for synthetic sources.
    pub fn default_packets(&self) -> usize {
        match self {
            TrafficKind::Uniform | TrafficKind::Hotspot10 => 8192,
            TrafficKind::Transpose => 640,
            _ => 0,
        }
    }

    fn bundled(&self) -> Option<&'static str> {
        match self {
            TrafficKind::Matrix => Some(MATRIX_TABLE),
            TrafficKind::H264 => Some(H264_TABLE),
            TrafficKind::Vopd => Some(VOPD_TABLE),
            TrafficKind::Mwd => Some(MWD_TABLE),
            TrafficKind::Pip => Some(PIP_TABLE),
            _ => None,
        }
    }
}

impl FromStr for TrafficKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "uniform" => TrafficKind::Uniform,
            "transpose" => TrafficKind::Transpose,
            "hotspot" | "hotspot10" | "hotspot-10" => TrafficKind::Hotspot10,
            "matrix" => TrafficKind::Matrix,
            "h264" | "h.264" => TrafficKind::H264,
            "vopd" => TrafficKind::Vopd,
            "mwd" => TrafficKind::Mwd,
            "pip" => TrafficKind::Pip,
            _ => match s.strip_prefix("table:") {
                Some(p) => TrafficKind::Table(PathBuf::from(p)),
                None => return Err(Error::Config(format!("unknown benchmark '{s}'"))),
            },
        })
    }
}

impl TryFrom<String> for TrafficKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TrafficKind> for String {
    fn from(k: TrafficKind) -> String {
        k.name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficSource {
    pub kind: TrafficKind,
    /// Packet budget; `None` uses the benchmark's own count.
    pub total_packets: Option<usize>,
    pub packet_length: usize,
    /// Cycles between consecutive packets of one node.
    pub injection_interval: u64,
    /// Hotspot destinations; `None` picks the central nodes of the middle layer.
    pub hotspot_nodes: Option<Vec<Coord3>>,
    pub hotspot_share: f64,
    pub seed: u64,
}

impl Default for TrafficSource {
    fn default() -> Self {
        TrafficSource {
            kind: TrafficKind::Uniform,
            total_packets: None,
            packet_length: 10,
            injection_interval: 100,
            hotspot_nodes: None,
            hotspot_share: 0.1,
            seed: 1,
        }
    }
}

impl TrafficSource {
    pub fn new(kind: TrafficKind, seed: u64) -> Self {
        TrafficSource { kind, seed, ..TrafficSource::default() }
    }
}

/// One packet entering its source network interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub cycle: u64,
    pub source: Coord3,
    pub destination: Coord3,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub source: Coord3,
    pub destination: Coord3,
    pub packet_count: usize,
    pub packet_length: usize,
    pub interval_cycles: u64,
}

pub fn transpose(c: Coord3) -> Coord3 {
    Coord3::new(c.z, c.y, c.x)
}

fn centre(n: usize) -> Vec<usize> {
    if n.is_multiple_of(2) && n >= 2 {
        vec![n / 2 - 1, n / 2]
    } else {
        vec![n / 2]
    }
}

/// Central nodes of the middle layer, at most four.
pub fn default_hotspots(dims: Dims) -> Vec<Coord3> {
    let z = dims.z / 2;
    let mut v = Vec::new();
    for &y in &centre(dims.y) {
        for &x in &centre(dims.x) {
            v.push(Coord3::new(x, y, z));
        }
    }
    v
}

/// Parse a traffic table. `origin` names the file in error messages.
pub fn parse_table(text: &str, origin: &Path) -> Result<Vec<Flow>> {
    let mut flows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::TrafficTable { path: origin.display().to_string(), line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", fields.len())));
        }
        let mut v = [0u64; 9];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f.parse().map_err(|_| err(format!("field {} '{f}' is not a non-negative integer", k + 1)))?;
        }
        let c = |a: u64, b: u64, c: u64| Coord3::new(a as usize, b as usize, c as usize);
        if v[7] == 0 {
            return Err(err("packet_length must be >= 1".into()));
        }
        flows.push(Flow {
            source: c(v[0], v[1], v[2]),
            destination: c(v[3], v[4], v[5]),
            packet_count: v[6] as usize,
            packet_length: v[7] as usize,
            interval_cycles: v[8].max(1),
        });
    }
    Ok(flows)
}

fn check_flows(flows: &[Flow], dims: Dims, origin: &Path) -> Result<()> {
    for f in flows {
        for c in [f.source, f.destination] {
            if !dims.contains(c) {
                return Err(Error::Config(format!("{}: node {c} outside mesh {dims}", origin.display())));
            }
        }
    }
    Ok(())
}

fn flows_for(src: &TrafficSource, dims: Dims) -> Result<Option<Vec<Flow>>> {
    let flows = match &src.kind {
        TrafficKind::Table(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_table(&text, path)?
        }
        k => match k.bundled() {
            Some(text) => parse_table(text, Path::new(&format!("<bundled {}>", k.name())))?,
            None => return Ok(None),
        },
    };
    let origin = match &src.kind {
        TrafficKind::Table(p) => p.clone(),
        k => PathBuf::from(k.name()),
    };
    check_flows(&flows, dims, &origin)?;
    Ok(Some(flows))
}

/// Timed injection schedule, sorted by cycle then source.
pub fn gen_traffic(src: &TrafficSource, cfg: &NetworkConfig) -> Result<Vec<Injection>> {
    let dims = cfg.dims;
    if src.packet_length == 0 || src.injection_interval == 0 {
        return Err(Error::Config("packet_length and injection_interval must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(src.seed ^ 0x7AFF_1C00_0000_0000);
    let mut out = Vec::new();
    if let Some(flows) = flows_for(src, dims)? {
        for f in flows.iter().filter(|f| f.source != f.destination) {
            let phase = rng.gen_range(0..f.interval_cycles);
            out.extend((0..f.packet_count).map(|k| Injection {
                cycle: phase + k as u64 * f.interval_cycles,
                source: f.source,
                destination: f.destination,
                length: f.packet_length,
            }));
        }
    } else {
        let sources: Vec<Coord3> = match src.kind {
            TrafficKind::Transpose => dims.coords().filter(|&c| dims.contains(transpose(c)) && transpose(c) != c).collect(),
            _ => dims.coords().collect(),
        };
        if sources.is_empty() || dims.node_count() < 2 {
            return Ok(out);
        }
        let total = src.total_packets.unwrap_or_else(|| src.kind.default_packets());
        let (base, extra) = (total / sources.len(), total % sources.len());
        for (i, &s) in sources.iter().enumerate() {
            let budget = base + usize::from(i < extra);
            let phase = rng.gen_range(0..src.injection_interval);
            for k in 0..budget {
                let destination = match src.kind {
                    TrafficKind::Transpose => transpose(s),
                    _ => {
                        let mut d = dims.coord_of(rng.gen_range(0..dims.node_count() - 1));
                        if d == s {
                            d = dims.coord_of(dims.node_count() - 1);
                        }
                        d
                    }
                };
                out.push(Injection {
                    cycle: phase + k as u64 * src.injection_interval,
                    source: s,
                    destination,
                    length: src.packet_length,
                });
            }
        }
        if src.kind == TrafficKind::Hotspot10 {
            retarget_hotspots(src, dims, &mut out, &mut rng)?;
        }
    }
    out.sort_by_key(|p| (p.cycle, dims.index_of(p.source)));
    Ok(out)
}

fn retarget_hotspots(src: &TrafficSource, dims: Dims, out: &mut [Injection], rng: &mut ChaCha8Rng) -> Result<()> {
    let hot = src.hotspot_nodes.clone().unwrap_or_else(|| default_hotspots(dims));
    if hot.is_empty() || hot.iter().any(|h| !dims.contains(*h)) {
        return Err(Error::Config(format!("hotspot nodes must be inside {dims}")));
    }
    let n = ((out.len() as f64) * src.hotspot_share).round() as usize;
    for i in sample(rng, out.len(), n.min(out.len())).into_iter() {
        let p = &mut out[i];
        let choices: Vec<Coord3> = hot.iter().copied().filter(|&h| h != p.source).collect();
        if let Some(&d) = choices.get(rng.gen_range(0..choices.len().max(1))) {
            p.destination = d;
            p.length = src.packet_length + 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: Dims) -> NetworkConfig {
        NetworkConfig::default().with_dims(d)
    }

    #[test]
    fn transpose_rule() {
        assert_eq!(transpose(Coord3::new(1, 2, 3)), Coord3::new(3, 2, 1));
        let sched = gen_traffic(&TrafficSource::new(TrafficKind::Transpose, 1), &cfg(Dims::new(4, 4, 4))).unwrap();
        assert_eq!(sched.len(), 640);
        assert!(sched.iter().all(|p| p.source != Coord3::new(2, 2, 2)));
        assert!(sched.iter().all(|p| p.destination == transpose(p.source)));
    }

    #[test]
    fn uniform_budget_per_node() {
        let c = cfg(Dims::new(4, 4, 4));
        let sched = gen_traffic(&TrafficSource::new(TrafficKind::Uniform, 3), &c).unwrap();
        assert_eq!(sched.len(), 8192);
        for n in c.dims.coords() {
            assert_eq!(sched.iter().filter(|p| p.source == n).count(), 128);
        }
        assert!(sched.iter().all(|p| p.source != p.destination));
    }

    #[test]
    fn hotspot_share() {
        let c = cfg(Dims::new(4, 4, 4));
        let sched = gen_traffic(&TrafficSource::new(TrafficKind::Hotspot10, 3), &c).unwrap();
        assert_eq!(sched.len(), 8192);
        let long = sched.iter().filter(|p| p.length == 11).count();
        assert_eq!(long, 819);
        let hot = default_hotspots(c.dims);
        assert_eq!(hot.len(), 4);
        assert!(hot.iter().all(|h| h.z == 2));
        assert!(sched.iter().filter(|p| p.length == 11).all(|p| hot.contains(&p.destination)));
    }

    #[test]
    fn bundled_tables_totals() {
        for (k, n) in [
            (TrafficKind::Matrix, 1080),
            (TrafficKind::H264, 8400),
            (TrafficKind::Vopd, 3494),
            (TrafficKind::Mwd, 1120),
            (TrafficKind::Pip, 512),
        ] {
            let c = cfg(k.default_dims().unwrap());
            assert_eq!(gen_traffic(&TrafficSource::new(k.clone(), 1), &c).unwrap().len(), n, "{}", k.name());
        }
    }

    #[test]
    fn table_errors_carry_line() {
        let e = parse_table("# c\n0,0,0,1,1,1,2,10,100\n0,0,x,1,1,1,2,10,100\n", Path::new("t.csv")).unwrap_err();
        assert!(matches!(e, Error::TrafficTable { line: 3, .. }), "{e}");
        let e = parse_table("0,0,0\n", Path::new("t.csv")).unwrap_err();
        assert!(matches!(e, Error::TrafficTable { line: 1, .. }));
    }

    #[test]
    fn missing_table_names_path() {
        let src = TrafficSource::new(TrafficKind::Table("/no/such/flows.csv".into()), 1);
        let e = gen_traffic(&src, &cfg(Dims::new(2, 2, 2))).unwrap_err();
        assert!(e.to_string().contains("/no/such/flows.csv"), "{e}");
    }

    #[test]
    fn deterministic() {
        let c = cfg(Dims::new(4, 4, 4));
        let s = TrafficSource::new(TrafficKind::Hotspot10, 9);
        assert_eq!(gen_traffic(&s, &c).unwrap(), gen_traffic(&s, &c).unwrap());
    }
}

// SPDX-License-Identifier: Apache-2.0
//! Hsiao SECDED(22,16) and the 44-bit flit wire image.
//!
//! A codeword keeps its 16 data bits in positions 0..16 and the 6 check bits
//! in 16..22. A packed flit is two codewords: A in bits 0..22 carries the
//! 14-bit header and payload bits 0..2, B in bits 22..44 carries payload bits
//! 2..18.
//!
//! Header layout inside codeword A data: kind `[0..2)`, next_port `[2..5)`,
//! destination x `[5..8)`, y `[8..11)`, z `[11..14)`.

use std::fmt;
use std::sync::OnceLock;

use crate::model::{Coord3, Direction, Flit, FlitKind};

pub const DATA_BITS: u32 = 16;
pub const CHECK_BITS: u32 = 6;
pub const CODEWORD_BITS: u32 = 22;
pub const FLIT_BITS: u32 = 44;

const DATA_MASK: u32 = (1 << DATA_BITS) - 1;
const CODEWORD_MASK: u32 = (1 << CODEWORD_BITS) - 1;
pub const FLIT_MASK: u64 = (1 << FLIT_BITS) - 1;

/// 22-bit codeword: data in the low 16 bits, check bits above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Codeword22(pub u32);

impl Codeword22 {
    pub fn data(self) -> u16 {
        (self.0 & DATA_MASK) as u16
    }

    pub fn check(self) -> u8 {
        ((self.0 >> DATA_BITS) & 0x3f) as u8
    }

    pub fn flip(self, bit: u32) -> Self {
        assert!(bit < CODEWORD_BITS);
        Codeword22(self.0 ^ (1 << bit))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStatus {
    Clean,
    Corrected(u8),
    DetectedUncorrectable,
}

impl DecodeStatus {
    /// Severity order used to report the worse of two codewords.
    fn rank(self) -> u8 {
        match self {
            DecodeStatus::Clean => 0,
            DecodeStatus::Corrected(_) => 1,
            DecodeStatus::DetectedUncorrectable => 2,
        }
    }

    pub fn worse(self, other: DecodeStatus) -> DecodeStatus {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn is_uncorrectable(self) -> bool {
        self == DecodeStatus::DetectedUncorrectable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub status: DecodeStatus,
    pub data: u16,
}

/// Parity-check matrix stored column-wise; column `i` is the syndrome
/// produced by an error in codeword bit `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HMatrix {
    columns: [u8; CODEWORD_BITS as usize],
}

impl HMatrix {
    /// Canonical Hsiao matrix: the 16 smallest weight-3 six-bit values for
    /// the data columns, identity for the check columns.
    pub fn hsiao() -> Self {
        let mut columns = [0u8; CODEWORD_BITS as usize];
        let data_cols = (0u8..64).filter(|c| c.count_ones() == 3).take(DATA_BITS as usize);
        for (slot, c) in columns.iter_mut().zip(data_cols) {
            *slot = c;
        }
        for j in 0..CHECK_BITS as usize {
            columns[DATA_BITS as usize + j] = 1 << j;
        }
        HMatrix { columns }
    }

    pub fn from_columns(columns: [u8; CODEWORD_BITS as usize]) -> Self {
        HMatrix { columns }
    }

    pub fn columns(&self) -> &[u8; CODEWORD_BITS as usize] {
        &self.columns
    }

    /// Every column nonzero, distinct, of odd weight and fitting in 6 bits.
    pub fn check_structure(&self) -> Result<(), String> {
        for (i, &c) in self.columns.iter().enumerate() {
            if c >= 64 {
                return Err(format!("column {i} = {c:#x} exceeds 6 bits"));
            }
            if c.count_ones() % 2 == 0 {
                return Err(format!("column {i} = {c:06b} has even weight"));
            }
            if let Some(j) = self.columns[..i].iter().position(|&o| o == c) {
                return Err(format!("columns {j} and {i} are equal ({c:06b})"));
            }
        }
        for j in 0..CHECK_BITS as usize {
            if self.columns[DATA_BITS as usize + j] != 1 << j {
                return Err(format!("check column {j} is not a unit vector"));
            }
        }
        Ok(())
    }

    pub fn encode(&self, data: u16) -> Codeword22 {
        let check = (0..DATA_BITS)
            .filter(|&i| data >> i & 1 == 1)
            .fold(0u8, |acc, i| acc ^ self.columns[i as usize]);
        Codeword22(u32::from(data) | u32::from(check) << DATA_BITS)
    }

    pub fn syndrome(&self, w: Codeword22) -> u8 {
        (0..CODEWORD_BITS)
            .filter(|&i| w.0 >> i & 1 == 1)
            .fold(0u8, |acc, i| acc ^ self.columns[i as usize])
    }

    pub fn decode(&self, w: Codeword22) -> DecodeOutcome {
        let w = Codeword22(w.0 & CODEWORD_MASK);
        let s = self.syndrome(w);
        if s == 0 {
            return DecodeOutcome { status: DecodeStatus::Clean, data: w.data() };
        }
        match self.columns.iter().position(|&c| c == s) {
            Some(bit) => DecodeOutcome {
                status: DecodeStatus::Corrected(bit as u8),
                data: w.flip(bit as u32).data(),
            },
            None => DecodeOutcome { status: DecodeStatus::DetectedUncorrectable, data: w.data() },
        }
    }

    /// Rows as 22-character bit strings, row 0 first, bit 0 leftmost.
    pub fn rows(&self) -> Vec<String> {
        (0..CHECK_BITS)
            .map(|r| {
                self.columns
                    .iter()
                    .map(|c| if c >> r & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

impl fmt::Display for HMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

fn hsiao() -> &'static HMatrix {
    static H: OnceLock<HMatrix> = OnceLock::new();
    H.get_or_init(HMatrix::hsiao)
}

pub fn secded_encode(data: u16) -> Codeword22 {
    hsiao().encode(data)
}

pub fn secded_decode(w: Codeword22) -> DecodeOutcome {
    hsiao().decode(w)
}

/// 44-bit wire image of a flit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PackedFlit(pub u64);

impl PackedFlit {
    pub fn codeword_a(self) -> Codeword22 {
        Codeword22((self.0 & u64::from(CODEWORD_MASK)) as u32)
    }

    pub fn codeword_b(self) -> Codeword22 {
        Codeword22(((self.0 >> CODEWORD_BITS) & u64::from(CODEWORD_MASK)) as u32)
    }

    pub fn from_codewords(a: Codeword22, b: Codeword22) -> Self {
        PackedFlit(u64::from(a.0) | u64::from(b.0) << CODEWORD_BITS)
    }

    pub fn flip(self, bit: u32) -> Self {
        assert!(bit < FLIT_BITS);
        PackedFlit(self.0 ^ (1 << bit))
    }

    pub fn xor(self, mask: u64) -> Self {
        PackedFlit((self.0 ^ mask) & FLIT_MASK)
    }

    pub fn bit(self, bit: u32) -> bool {
        self.0 >> bit & 1 == 1
    }
}

/// Result of unpacking: the flit plus per-codeword and overall status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unpacked {
    pub flit: Flit,
    pub status_a: DecodeStatus,
    pub status_b: DecodeStatus,
}

impl Unpacked {
    pub fn status(&self) -> DecodeStatus {
        self.status_a.worse(self.status_b)
    }
}

fn header_word(f: &Flit) -> u16 {
    let d = f.destination;
    assert!(d.x < 8 && d.y < 8 && d.z < 8, "destination {d} exceeds header budget");
    (f.kind as u16)
        | (f.next_port as u16) << 2
        | (d.x as u16) << 5
        | (d.y as u16) << 8
        | (d.z as u16) << 11
}

fn data_halves(f: &Flit) -> (u16, u16) {
    assert!(f.payload < 1 << crate::model::PAYLOAD_BITS, "payload exceeds 18 bits");
    let a = header_word(f) | ((f.payload & 0b11) as u16) << 14;
    let b = (f.payload >> 2) as u16;
    (a, b)
}

/// Codeword A alone; used for per-hop re-encoding after a next-port merge.
pub fn encode_codeword_a(f: &Flit) -> Codeword22 {
    secded_encode(data_halves(f).0)
}

pub fn flit_pack(f: &Flit) -> PackedFlit {
    let (a, b) = data_halves(f);
    PackedFlit::from_codewords(secded_encode(a), secded_encode(b))
}

fn flit_from_halves(a: u16, b: u16, packet_id: u32, seq_index: u16) -> Flit {
    let a = u32::from(a);
    let next = ((a >> 2) & 0b111) as usize;
    Flit {
        kind: FlitKind::from_bits(a),
        // 7 has no port; it only arises from corruption and decodes as Local.
        next_port: Direction::from_index(next).unwrap_or(Direction::Local),
        destination: Coord3::new(
            ((a >> 5) & 7) as usize,
            ((a >> 8) & 7) as usize,
            ((a >> 11) & 7) as usize,
        ),
        payload: (a >> 14) & 0b11 | u32::from(b) << 2,
        packet_id,
        seq_index,
    }
}

/// Decode both codewords and rebuild the flit. Bookkeeping fields are
/// copied from the caller since they are not on the wire.
pub fn flit_unpack(p: PackedFlit, packet_id: u32, seq_index: u16) -> Unpacked {
    let a = secded_decode(p.codeword_a());
    let b = secded_decode(p.codeword_b());
    Unpacked {
        flit: flit_from_halves(a.data, b.data, packet_id, seq_index),
        status_a: a.status,
        status_b: b.status,
    }
}

/// Extract the data bits without any checking, as an unprotected link would.
pub fn flit_unpack_raw(p: PackedFlit, packet_id: u32, seq_index: u16) -> Flit {
    flit_from_halves(p.codeword_a().data(), p.codeword_b().data(), packet_id, seq_index)
}

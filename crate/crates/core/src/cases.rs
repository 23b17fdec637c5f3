//! Fixed-point conformance vectors for the C++ runtime (`.gnnb-cases`).
//!
//! Layout, little-endian:
//!
//! ```text
//! header  "GNBC"  u32 version = 1  u64 count
//! record  u8 op  u8 W  u8 I  u8 pad  i64 a  i64 b  i64 expected      (28 bytes)
//! ```
//!
//! `op` 0 quantizes the f64 whose bit pattern is `a` (`b` unused); ops 1-3
//! are saturating add, mul and sub on raw values.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointFormat;

pub const MAGIC: &[u8; 4] = b"GNBC";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16;
pub const RECORD_BYTES: usize = 28;
/// Widest format emitted; the runtime's products must fit in 64 bits.
pub const MAX_WIDTH: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CaseOp {
    Quantize = 0,
    Add = 1,
    Mul = 2,
    Sub = 3,
}

impl CaseOp {
    const ALL: [CaseOp; 4] = [CaseOp::Quantize, CaseOp::Add, CaseOp::Mul, CaseOp::Sub];

    fn from_u8(v: u8) -> Result<Self> {
        Self::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown case op {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub op: CaseOp,
    pub format: FixedPointFormat,
    pub a: i64,
    pub b: i64,
    pub expected: i64,
}

impl Case {
    /// Recomputes `expected` from the operands.
    pub fn evaluate(op: CaseOp, format: FixedPointFormat, a: i64, b: i64) -> i64 {
        match op {
            CaseOp::Quantize => format.quantize_raw(f64::from_bits(a as u64)),
            CaseOp::Add => format.add_raw(a, b),
            CaseOp::Mul => format.mul_raw(a, b),
            CaseOp::Sub => format.sub_raw(a, b),
        }
    }
}

fn operand(rng: &mut ChaCha8Rng, f: FixedPointFormat) -> i64 {
    match rng.gen_range(0..8) {
        0 => f.min_raw(),
        1 => f.max_raw(),
        2 => rng.gen_range(-4..=4),
        _ => rng.gen_range(f.min_raw()..=f.max_raw()),
    }
}

fn real(rng: &mut ChaCha8Rng, f: FixedPointFormat) -> f64 {
    let span = f.max_value() * 1.25;
    match rng.gen_range(0..6) {
        // exactly representable and half-step values probe the floor rule
        0 => f.raw_to_f64(operand(rng, f)),
        1 => f.raw_to_f64(operand(rng, f)) + f.resolution() / 2.0,
        2 => -0.0,
        _ => rng.gen_range(-span..span),
    }
}

pub fn generate_cases(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let op = CaseOp::ALL[i % 4];
            let w = rng.gen_range(2..=MAX_WIDTH);
            let format = FixedPointFormat::new(w, rng.gen_range(1..=w)).expect("in range");
            let (a, b) = match op {
                CaseOp::Quantize => (real(&mut rng, format).to_bits() as i64, 0),
                _ => (operand(&mut rng, format), operand(&mut rng, format)),
            };
            Case {
                op,
                format,
                a,
                b,
                expected: Case::evaluate(op, format, a, b),
            }
        })
        .collect()
}

pub fn encode_cases(cases: &[Case]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + RECORD_BYTES * cases.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(cases.len() as u64).to_le_bytes());
    for c in cases {
        out.extend_from_slice(&[c.op as u8, c.format.total_bits() as u8, c.format.int_bits() as u8, 0]);
        for v in [c.a, c.b, c.expected] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_cases(bytes: &[u8]) -> Result<Vec<Case>> {
    let bad = |m: &str| Error::Format(format!("cases file: {m}"));
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err(bad("missing GNBC header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_BYTES..];
    if (body.len() as u64) != count.saturating_mul(RECORD_BYTES as u64) {
        return Err(bad(&format!("expected {count} records, found {} bytes", body.len())));
    }
    body.chunks_exact(RECORD_BYTES)
        .map(|r| {
            let word = |k: usize| i64::from_le_bytes(r[4 + 8 * k..12 + 8 * k].try_into().expect("8 bytes"));
            Ok(Case {
                op: CaseOp::from_u8(r[0])?,
                format: FixedPointFormat::new(r[1] as u32, r[2] as u32)?,
                a: word(0),
                b: word(1),
                expected: word(2),
            })
        })
        .collect()
}

pub fn write_cases(path: &Path, cases: &[Case]) -> Result<()> {
    fs::write(path, encode_cases(cases)).map_err(|e| Error::io(path, e))
}

pub fn read_cases(path: &Path) -> Result<Vec<Case>> {
    decode_cases(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

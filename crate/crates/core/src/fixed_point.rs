//! Parameterized two's-complement fixed-point numbers.
//!
//! A format `fixed<W,I>` has `W` total bits of which `I` are integer bits
//! (sign included), leaving `F = W - I` fractional bits. Every operation
//! rounds by truncation toward negative infinity and saturates on overflow.
//! The generated C++ runtime mirrors these rules bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FixedPointFormat {
    total_bits: u32,
    int_bits: u32,
}

impl FixedPointFormat {
    pub fn new(total_bits: u32, int_bits: u32) -> Result<Self> {
        if !(2..=64).contains(&total_bits) {
            return Err(Error::Format(format!("total bits must be in 2..=64, got {total_bits}")));
        }
        if int_bits < 1 || int_bits > total_bits {
            return Err(Error::Format(format!(
                "integer bits must be in 1..={total_bits}, got {int_bits}"
            )));
        }
        Ok(Self { total_bits, int_bits })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.total_bits - self.int_bits
    }

    pub fn min_raw(&self) -> i64 {
        (-(1i128 << (self.total_bits - 1))) as i64
    }

    pub fn max_raw(&self) -> i64 {
        ((1i128 << (self.total_bits - 1)) - 1) as i64
    }

    /// Smallest positive step, `2^-F`.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_bits() as f64)).exp2()
    }

    pub fn max_value(&self) -> f64 {
        self.raw_to_f64(self.max_raw())
    }

    pub fn min_value(&self) -> f64 {
        self.raw_to_f64(self.min_raw())
    }

    /// Clamp an exact wide result into the W-bit raw range.
    pub fn saturate(&self, wide: i128) -> i64 {
        wide.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    /// Clamp into the double-width accumulator range (2W bits).
    pub fn saturate_wide(&self, wide: i128) -> i128 {
        let bits = 2 * self.total_bits;
        if bits >= 128 {
            return wide;
        }
        let hi = (1i128 << (bits - 1)) - 1;
        let lo = -(1i128 << (bits - 1));
        wide.clamp(lo, hi)
    }

    /// `floor(x * 2^F)` saturated to the format. NaN maps to zero; callers
    /// that must reject NaN go through [`quantize`].
    pub fn quantize_raw(&self, x: f64) -> i64 {
        if x.is_nan() {
            return 0;
        }
        let scaled = (x * (self.frac_bits() as f64).exp2()).floor();
        let bound = ((self.total_bits - 1) as f64).exp2();
        if scaled >= bound {
            self.max_raw()
        } else if scaled < -bound {
            self.min_raw()
        } else {
            scaled as i64
        }
    }

    /// `raw * 2^-F`. Exact whenever `W <= 53`.
    pub fn raw_to_f64(&self, raw: i64) -> f64 {
        raw as f64 * (-(self.frac_bits() as f64)).exp2()
    }

    pub fn add_raw(&self, a: i64, b: i64) -> i64 {
        self.saturate(a as i128 + b as i128)
    }

    pub fn sub_raw(&self, a: i64, b: i64) -> i64 {
        self.saturate(a as i128 - b as i128)
    }

    /// Exact product shifted right by F (arithmetic shift = floor), saturated.
    pub fn mul_raw(&self, a: i64, b: i64) -> i64 {
        self.saturate((a as i128 * b as i128) >> self.frac_bits())
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fixed<{},{}>", self.total_bits, self.int_bits)
    }
}

impl FromStr for FixedPointFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("expected `fixed<W,I>`, got `{s}`"));
        let inner = s
            .trim()
            .strip_prefix("fixed<")
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(bad)?;
        let (w, i) = inner.split_once(',').ok_or_else(bad)?;
        let w: u32 = w.trim().parse().map_err(|_| bad())?;
        let i: u32 = i.trim().parse().map_err(|_| bad())?;
        FixedPointFormat::new(w, i)
    }
}

impl Serialize for FixedPointFormat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FixedPointFormat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A raw two's-complement value tagged with its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedValue {
    raw: i64,
    format: FixedPointFormat,
}

impl FixedValue {
    pub fn from_raw(raw: i64, format: FixedPointFormat) -> Result<Self> {
        if raw < format.min_raw() || raw > format.max_raw() {
            return Err(Error::Format(format!("raw value {raw} does not fit in {format}")));
        }
        Ok(Self { raw, format })
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    fn same_format(&self, other: &FixedValue) -> Result<FixedPointFormat> {
        if self.format != other.format {
            return Err(Error::FormatMismatch {
                lhs: self.format.to_string(),
                rhs: other.format.to_string(),
            });
        }
        Ok(self.format)
    }
}

impl PartialOrd for FixedValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        (self.format == other.format).then(|| self.raw.cmp(&other.raw))
    }
}

impl fmt::Display for FixedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", dequantize(*self))
    }
}

/// Truncating, saturating conversion of a real into `format`.
/// Infinities saturate; NaN is rejected.
pub fn quantize(x: f64, format: FixedPointFormat) -> Result<FixedValue> {
    if x.is_nan() {
        return Err(Error::NaN);
    }
    Ok(FixedValue {
        raw: format.quantize_raw(x),
        format,
    })
}

pub fn dequantize(v: FixedValue) -> f64 {
    v.format.raw_to_f64(v.raw)
}

pub fn fixed_add(a: FixedValue, b: FixedValue) -> Result<FixedValue> {
    let format = a.same_format(&b)?;
    Ok(FixedValue {
        raw: format.add_raw(a.raw, b.raw),
        format,
    })
}

pub fn fixed_sub(a: FixedValue, b: FixedValue) -> Result<FixedValue> {
    let format = a.same_format(&b)?;
    Ok(FixedValue {
        raw: format.sub_raw(a.raw, b.raw),
        format,
    })
}

pub fn fixed_mul(a: FixedValue, b: FixedValue) -> Result<FixedValue> {
    let format = a.same_format(&b)?;
    Ok(FixedValue {
        raw: format.mul_raw(a.raw, b.raw),
        format,
    })
}

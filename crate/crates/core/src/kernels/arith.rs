//! Scalar arithmetic shared by every kernel, in float and fixed flavours.

use std::fmt::Debug;

use crate::fixed_point::FixedPointFormat;
use crate::model_ir::ActivationKind;

/// Arithmetic context. Kernels are written once against this trait; the
/// float reference and the bit-accurate fixed-point simulator are its two
/// implementations.
///
/// `Acc` is the dot-product/sum accumulator. In fixed mode it is a
/// double-width (2W bits, 2F fractional bits) register that is re-quantized
/// once when finished.
pub trait Arith: Sync + Send {
    type Value: Copy + PartialOrd + Debug + Send + Sync;
    type Acc: Copy + Debug + Send + Sync;

    fn zero(&self) -> Self::Value;
    // needs the format carried by `self`
    #[allow(clippy::wrong_self_convention)]
    fn from_f64(&self, x: f64) -> Self::Value;
    fn to_f64(&self, v: Self::Value) -> f64;

    /// Conversion of external data (features, weights); fixed mode rejects NaN.
    fn quantize(&self, x: f64) -> crate::Result<Self::Value> {
        Ok(self.from_f64(x))
    }

    fn add(&self, a: Self::Value, b: Self::Value) -> Self::Value;
    fn mul(&self, a: Self::Value, b: Self::Value) -> Self::Value;

    fn acc_zero(&self) -> Self::Acc;
    fn acc_add(&self, acc: Self::Acc, v: Self::Value) -> Self::Acc;
    fn acc_mac(&self, acc: Self::Acc, a: Self::Value, b: Self::Value) -> Self::Acc;
    fn acc_finish(&self, acc: Self::Acc) -> Self::Value;
    /// `floor(acc / n)`, re-quantized.
    fn acc_mean(&self, acc: Self::Acc, n: usize) -> Self::Value;

    fn activate(&self, v: Self::Value, act: ActivationKind) -> Self::Value;

    fn max(&self, a: Self::Value, b: Self::Value) -> Self::Value {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min(&self, a: Self::Value, b: Self::Value) -> Self::Value {
        if b < a {
            b
        } else {
            a
        }
    }
}

/// Double-precision reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct FloatArith;

impl Arith for FloatArith {
    type Value = f64;
    type Acc = f64;

    fn zero(&self) -> f64 {
        0.0
    }

    fn from_f64(&self, x: f64) -> f64 {
        x
    }

    fn to_f64(&self, v: f64) -> f64 {
        v
    }

    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }

    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }

    fn acc_zero(&self) -> f64 {
        0.0
    }

    fn acc_add(&self, acc: f64, v: f64) -> f64 {
        acc + v
    }

    fn acc_mac(&self, acc: f64, a: f64, b: f64) -> f64 {
        acc + a * b
    }

    fn acc_finish(&self, acc: f64) -> f64 {
        acc
    }

    fn acc_mean(&self, acc: f64, n: usize) -> f64 {
        acc / n as f64
    }

    fn activate(&self, v: f64, act: ActivationKind) -> f64 {
        act.eval(v)
    }
}

/// Raw two's-complement arithmetic in a single format. Values are raw
/// integers; the accumulator holds `2F` fractional bits.
#[derive(Debug, Clone, Copy)]
pub struct FixedArith {
    pub format: FixedPointFormat,
}

impl FixedArith {
    pub fn new(format: FixedPointFormat) -> Self {
        Self { format }
    }

    fn widen(&self, v: i64) -> i128 {
        (v as i128) << self.format.frac_bits()
    }
}

impl Arith for FixedArith {
    type Value = i64;
    type Acc = i128;

    fn zero(&self) -> i64 {
        0
    }

    fn from_f64(&self, x: f64) -> i64 {
        self.format.quantize_raw(x)
    }

    fn to_f64(&self, v: i64) -> f64 {
        self.format.raw_to_f64(v)
    }

    fn quantize(&self, x: f64) -> crate::Result<i64> {
        Ok(crate::fixed_point::quantize(x, self.format)?.raw())
    }

    fn add(&self, a: i64, b: i64) -> i64 {
        self.format.add_raw(a, b)
    }

    fn mul(&self, a: i64, b: i64) -> i64 {
        self.format.mul_raw(a, b)
    }

    fn acc_zero(&self) -> i128 {
        0
    }

    fn acc_add(&self, acc: i128, v: i64) -> i128 {
        self.format.saturate_wide(acc.saturating_add(self.widen(v)))
    }

    fn acc_mac(&self, acc: i128, a: i64, b: i64) -> i128 {
        self.format.saturate_wide(acc.saturating_add(a as i128 * b as i128))
    }

    fn acc_finish(&self, acc: i128) -> i64 {
        self.format.saturate(acc >> self.format.frac_bits())
    }

    fn acc_mean(&self, acc: i128, n: usize) -> i64 {
        self.format
            .saturate(acc.div_euclid(n as i128) >> self.format.frac_bits())
    }

    fn activate(&self, v: i64, act: ActivationKind) -> i64 {
        match act {
            ActivationKind::None => v,
            ActivationKind::Relu => v.max(0),
            other => self.format.quantize_raw(other.eval(self.to_f64(v))),
        }
    }
}

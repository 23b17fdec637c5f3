use super::arith::Arith;
use crate::error::{Error, Result};

/// Dense layer `y = W x + b` with `W` stored row-major as `[out_dim][in_dim]`.
///
/// Evaluation walks `BLOCK_SIZE_OUT x BLOCK_SIZE_IN` tiles, out-tile major
/// and in-tile minor. Each output keeps one accumulator seeded with its bias
/// that sees inputs in ascending index order, and is re-quantized once, so
/// the result is bit-identical for every tiling.
#[derive(Debug, Clone)]
pub struct Linear<V> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub p_in: usize,
    pub p_out: usize,
    pub weight: Vec<V>,
    pub bias: Option<Vec<V>>,
}

impl<V: Copy> Linear<V> {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        p_in: usize,
        p_out: usize,
        weight: Vec<V>,
        bias: Option<Vec<V>>,
    ) -> Result<Self> {
        if weight.len() != in_dim * out_dim {
            return Err(Error::Shape(format!(
                "weight has {} values, expected {out_dim}x{in_dim}",
                weight.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_dim {
                return Err(Error::Shape(format!("bias has {} values, expected {out_dim}", b.len())));
            }
        }
        if p_in == 0 || p_in > in_dim.max(1) || p_out == 0 || p_out > out_dim.max(1) {
            return Err(Error::Shape(format!(
                "tiling {p_in}x{p_out} does not fit a {in_dim}->{out_dim} layer"
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            p_in,
            p_out,
            weight,
            bias,
        })
    }

    pub fn forward<A: Arith<Value = V>>(&self, arith: &A, x: &[V]) -> Result<Vec<V>> {
        linear_tiled(
            arith,
            x,
            &self.weight,
            self.bias.as_deref(),
            self.in_dim,
            self.out_dim,
            self.p_in,
            self.p_out,
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub fn linear_tiled<A: Arith>(
    arith: &A,
    x: &[A::Value],
    weight: &[A::Value],
    bias: Option<&[A::Value]>,
    in_dim: usize,
    out_dim: usize,
    p_in: usize,
    p_out: usize,
) -> Result<Vec<A::Value>> {
    if x.len() != in_dim {
        return Err(Error::Shape(format!(
            "linear input has {} values, expected {in_dim}",
            x.len()
        )));
    }
    if weight.len() != in_dim * out_dim || bias.is_some_and(|b| b.len() != out_dim) {
        return Err(Error::Shape(format!(
            "linear {in_dim}->{out_dim}: bad parameter shapes"
        )));
    }
    if p_in == 0 || p_out == 0 {
        return Err(Error::Shape("tiling factors must be >= 1".into()));
    }
    let mut out = Vec::with_capacity(out_dim);
    let mut acc = vec![arith.acc_zero(); p_out];
    for o0 in (0..out_dim).step_by(p_out) {
        let o1 = (o0 + p_out).min(out_dim);
        for (o, a) in (o0..o1).zip(acc.iter_mut()) {
            *a = match bias {
                Some(b) => arith.acc_add(arith.acc_zero(), b[o]),
                None => arith.acc_zero(),
            };
        }
        for i0 in (0..in_dim).step_by(p_in) {
            let i1 = (i0 + p_in).min(in_dim);
            for (o, a) in (o0..o1).zip(acc.iter_mut()) {
                let row = &weight[o * in_dim..(o + 1) * in_dim];
                for i in i0..i1 {
                    *a = arith.acc_mac(*a, row[i], x[i]);
                }
            }
        }
        out.extend(acc[..o1 - o0].iter().map(|&a| arith.acc_finish(a)));
    }
    Ok(out)
}

//! Constant-space partial aggregations over a stream of neighbor vectors.

use serde::{Deserialize, Serialize};

use super::arith::Arith;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggKind {
    Sum,
    Min,
    Max,
    Mean,
    Variance,
    Std,
}

/// Streaming accumulator whose size depends only on `dim`.
///
/// Sum and mean use the wide accumulator. Min and max keep the running
/// extremum. Variance and std run Welford's update in double precision on
/// dequantized inputs and quantize once at finalize, in both numeric modes.
#[derive(Debug, Clone)]
pub struct AggState<A: Arith> {
    kind: AggKind,
    dim: usize,
    count: usize,
    acc: Vec<A::Acc>,
    extremum: Vec<A::Value>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl<A: Arith> AggState<A> {
    pub fn new(arith: &A, kind: AggKind, dim: usize) -> Self {
        let mut state = Self {
            kind,
            dim,
            count: 0,
            acc: Vec::new(),
            extremum: Vec::new(),
            mean: Vec::new(),
            m2: Vec::new(),
        };
        match kind {
            AggKind::Sum | AggKind::Mean => state.acc = vec![arith.acc_zero(); dim],
            AggKind::Min | AggKind::Max => state.extremum = vec![arith.zero(); dim],
            AggKind::Variance | AggKind::Std => {
                state.mean = vec![0.0; dim];
                state.m2 = vec![0.0; dim];
            }
        }
        state
    }

    pub fn kind(&self) -> AggKind {
        self.kind
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn update(&mut self, arith: &A, v: &[A::Value]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape(format!(
                "aggregation expects dim {}, got {}",
                self.dim,
                v.len()
            )));
        }
        let first = self.count == 0;
        self.count += 1;
        match self.kind {
            AggKind::Sum | AggKind::Mean => {
                for (a, &x) in self.acc.iter_mut().zip(v) {
                    *a = arith.acc_add(*a, x);
                }
            }
            AggKind::Min | AggKind::Max => {
                let is_max = self.kind == AggKind::Max;
                for (e, &x) in self.extremum.iter_mut().zip(v) {
                    *e = if first {
                        x
                    } else if is_max {
                        arith.max(*e, x)
                    } else {
                        arith.min(*e, x)
                    };
                }
            }
            AggKind::Variance | AggKind::Std => {
                let n = self.count as f64;
                for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(v) {
                    let x = arith.to_f64(x);
                    let delta = x - *mean;
                    *mean += delta / n;
                    *m2 += delta * (x - *mean);
                }
            }
        }
        Ok(())
    }

    /// Final aggregate; the zero vector when nothing was aggregated.
    pub fn finalize(&self, arith: &A) -> Vec<A::Value> {
        if self.count == 0 {
            return vec![arith.zero(); self.dim];
        }
        match self.kind {
            AggKind::Sum => self.acc.iter().map(|&a| arith.acc_finish(a)).collect(),
            AggKind::Mean => self.acc.iter().map(|&a| arith.acc_mean(a, self.count)).collect(),
            AggKind::Min | AggKind::Max => self.extremum.clone(),
            AggKind::Variance | AggKind::Std => {
                let n = self.count as f64;
                self.m2
                    .iter()
                    .map(|&m2| {
                        let var = (m2 / n).max(0.0);
                        arith.from_f64(if self.kind == AggKind::Std { var.sqrt() } else { var })
                    })
                    .collect()
            }
        }
    }
}

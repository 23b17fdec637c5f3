//! Functional simulator for generated accelerators.
//!
//! Kernels are generic over [`Arith`], so the float reference and the
//! bit-accurate fixed-point model share one implementation of the dataflow.

pub mod aggregate;
pub mod arith;
pub mod conv;
pub mod linear;
pub mod model;

pub use aggregate::{AggKind, AggState};
pub use arith::{Arith, FixedArith, FloatArith};
pub use conv::{conv_forward, pna_scalers, ConvLayer, ConvParams};
pub use linear::{linear_tiled, Linear};
pub use model::{apply_skip, global_pool, mlp_forward, model_forward, model_forward_raw, ModelOutput, Simulator};

/// Row-major `rows x dim` table of node (or edge) embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<V> {
    rows: usize,
    dim: usize,
    data: Vec<V>,
}

impl<V: Copy> EmbeddingTable<V> {
    pub fn zeros<A: Arith<Value = V>>(arith: &A, rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![arith.zero(); rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<V>) -> crate::Result<Self> {
        if data.len() != rows * dim {
            return Err(crate::Error::Shape(format!(
                "table of {rows}x{dim} needs {} values, got {}",
                rows * dim,
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[V] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [V] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[V] {
        &self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(V) -> U) -> EmbeddingTable<U> {
        EmbeddingTable {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

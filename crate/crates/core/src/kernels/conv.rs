//! Explicit message-passing graph convolutions.
//!
//! Every kernel follows the same per-node dataflow: walk the node's block
//! of the neighbor table, transform each neighbor embedding (phi), fold it
//! into a partial aggregation, finalize, combine with the node's own
//! embedding and apply gamma.

use super::aggregate::{AggKind, AggState};
use super::arith::Arith;
use super::linear::Linear;
use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{DegreeTables, GraphCOO, NeighborCSR};
use crate::model_ir::{ActivationKind, ConvKind, LayerPlan};

pub const PNA_AGGS: [AggKind; 4] = [AggKind::Mean, AggKind::Min, AggKind::Max, AggKind::Std];

#[derive(Debug, Clone)]
pub enum ConvParams<V> {
    /// `out_i = W (x_i / d_i + sum_j x_j / sqrt(d_j d_i)) + b`, `d = in_degree + 1`.
    Gcn { lin: Linear<V> },
    /// `[W_self | W_neigh]` applied to `concat(x_i, mean_j x_j)`.
    Sage { lin: Linear<V> },
    /// `mlp1(act(mlp0((1 + eps) x_i + sum_j relu(x_j + edge_lin(e_ji)))))`.
    Gin {
        one_plus_eps: V,
        edge_lin: Option<Linear<V>>,
        mlp0: Linear<V>,
        mlp1: Linear<V>,
        act: ActivationKind,
    },
    /// `gamma(concat(scaled aggregates of phi(concat(x_i, x_j))), x_i)`.
    Pna {
        phi: Linear<V>,
        gamma: Linear<V>,
        delta: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ConvLayer<V> {
    pub plan: LayerPlan,
    pub params: ConvParams<V>,
}

impl<V> ConvLayer<V> {
    pub fn kind(&self) -> ConvKind {
        match self.params {
            ConvParams::Gcn { .. } => ConvKind::Gcn,
            ConvParams::Sage { .. } => ConvKind::Sage,
            ConvParams::Gin { .. } => ConvKind::Gin,
            ConvParams::Pna { .. } => ConvKind::Pna,
        }
    }
}

/// PNA degree scalers `[identity, amplification, attenuation]` for in-degree `d`.
pub fn pna_scalers(d: u32, delta: f64) -> [f64; 3] {
    let log_d = (d as f64 + 1.0).ln();
    let amplification = if delta > 0.0 { log_d / delta } else { 0.0 };
    let attenuation = if d == 0 { 0.0 } else { delta / log_d };
    [1.0, amplification, attenuation]
}

pub fn conv_forward<A: Arith>(
    arith: &A,
    layer: &ConvLayer<A::Value>,
    g: &GraphCOO,
    csr: &NeighborCSR,
    deg: &DegreeTables,
    x: &EmbeddingTable<A::Value>,
    edge_x: Option<&EmbeddingTable<A::Value>>,
) -> Result<EmbeddingTable<A::Value>> {
    let n = g.num_nodes;
    let plan = &layer.plan;
    if x.rows() != n || x.dim() != plan.in_dim {
        return Err(Error::Shape(format!(
            "layer {} expects {n}x{} embeddings, got {}x{}",
            plan.index,
            plan.in_dim,
            x.rows(),
            x.dim()
        )));
    }
    if csr.offsets.len() != n + 1 || csr.neighbors.len() != g.num_edges() || deg.in_degree.len() != n {
        return Err(Error::Shape("graph tables do not match the graph".into()));
    }

    let mut out = EmbeddingTable::zeros(arith, n, plan.out_dim);
    match &layer.params {
        ConvParams::Gcn { lin } => {
            let norm_deg: Vec<f64> = deg.in_degree.iter().map(|&d| d as f64 + 1.0).collect();
            for i in 0..n {
                let mut agg = AggState::new(arith, AggKind::Sum, plan.in_dim);
                let mut msg = vec![arith.zero(); plan.in_dim];
                for &j in csr.neighbors_of(i) {
                    let j = j as usize;
                    let c = arith.from_f64(1.0 / (norm_deg[j] * norm_deg[i]).sqrt());
                    for (m, &xj) in msg.iter_mut().zip(x.row(j)) {
                        *m = arith.mul(xj, c);
                    }
                    agg.update(arith, &msg)?;
                }
                let c_self = arith.from_f64(1.0 / norm_deg[i]);
                let combined: Vec<A::Value> = agg
                    .finalize(arith)
                    .into_iter()
                    .zip(x.row(i))
                    .map(|(a, &xi)| arith.add(a, arith.mul(xi, c_self)))
                    .collect();
                out.row_mut(i).copy_from_slice(&lin.forward(arith, &combined)?);
            }
        }
        ConvParams::Sage { lin } => {
            for i in 0..n {
                let mut agg = AggState::new(arith, AggKind::Mean, plan.in_dim);
                for &j in csr.neighbors_of(i) {
                    agg.update(arith, x.row(j as usize))?;
                }
                let mut input = x.row(i).to_vec();
                input.extend(agg.finalize(arith));
                out.row_mut(i).copy_from_slice(&lin.forward(arith, &input)?);
            }
        }
        ConvParams::Gin {
            one_plus_eps,
            edge_lin,
            mlp0,
            mlp1,
            act,
        } => {
            let edge_emb = match (edge_lin, edge_x) {
                (Some(lin), Some(ex)) => {
                    if ex.rows() != g.num_edges() || ex.dim() != lin.in_dim {
                        return Err(Error::Shape("edge feature table does not match edge encoder".into()));
                    }
                    let mut t = EmbeddingTable::zeros(arith, g.num_edges(), plan.in_dim);
                    for e in 0..g.num_edges() {
                        t.row_mut(e).copy_from_slice(&lin.forward(arith, ex.row(e))?);
                    }
                    Some(t)
                }
                (Some(_), None) => return Err(Error::Shape(format!("layer {} needs edge features", plan.index))),
                (None, _) => None,
            };
            let mut msg = vec![arith.zero(); plan.in_dim];
            for i in 0..n {
                let mut agg = AggState::new(arith, AggKind::Sum, plan.in_dim);
                for (&j, &e) in csr.neighbors_of(i).iter().zip(csr.edges_of(i)) {
                    let xj = x.row(j as usize);
                    match &edge_emb {
                        Some(t) => {
                            for ((m, &a), &b) in msg.iter_mut().zip(xj).zip(t.row(e as usize)) {
                                *m = arith.activate(arith.add(a, b), ActivationKind::Relu);
                            }
                        }
                        None => {
                            for (m, &a) in msg.iter_mut().zip(xj) {
                                *m = arith.activate(a, ActivationKind::Relu);
                            }
                        }
                    }
                    agg.update(arith, &msg)?;
                }
                let h: Vec<A::Value> = agg
                    .finalize(arith)
                    .into_iter()
                    .zip(x.row(i))
                    .map(|(a, &xi)| arith.add(arith.mul(*one_plus_eps, xi), a))
                    .collect();
                let hidden: Vec<A::Value> = mlp0
                    .forward(arith, &h)?
                    .into_iter()
                    .map(|v| arith.activate(v, *act))
                    .collect();
                out.row_mut(i).copy_from_slice(&mlp1.forward(arith, &hidden)?);
            }
        }
        ConvParams::Pna { phi, gamma, delta } => {
            let d_out = plan.out_dim;
            let mut pair = vec![arith.zero(); 2 * plan.in_dim];
            for i in 0..n {
                let mut aggs: Vec<AggState<A>> = PNA_AGGS.iter().map(|&k| AggState::new(arith, k, d_out)).collect();
                pair[..plan.in_dim].copy_from_slice(x.row(i));
                for &j in csr.neighbors_of(i) {
                    pair[plan.in_dim..].copy_from_slice(x.row(j as usize));
                    let m = phi.forward(arith, &pair)?;
                    for agg in &mut aggs {
                        agg.update(arith, &m)?;
                    }
                }
                let finals: Vec<Vec<A::Value>> = aggs.iter().map(|a| a.finalize(arith)).collect();
                let mut input = Vec::with_capacity(gamma.in_dim);
                for (s, scale) in pna_scalers(deg.in_degree[i], *delta).into_iter().enumerate() {
                    let scale = arith.from_f64(scale);
                    for f in &finals {
                        if s == 0 {
                            input.extend_from_slice(f);
                        } else {
                            input.extend(f.iter().map(|&v| arith.mul(v, scale)));
                        }
                    }
                }
                input.extend_from_slice(x.row(i));
                out.row_mut(i).copy_from_slice(&gamma.forward(arith, &input)?);
            }
        }
    }
    Ok(out)
}

//! Deterministic analytic latency/BRAM model, the stand-in for
//! post-synthesis reports.
//!
//! Latency (cycles), with `N`/`E` the node and edge guesses. Every conv is
//! priced as a message transform `phi` and an update `gamma` at the layer's
//! dims; only `c_msg` tells the kinds apart.
//!
//! ```text
//! lin(i, o, pi, po) = ceil(i/pi) * ceil(o/po) + 10
//! conv layer        = E * ceil(d_in/p_in) * c_msg
//!                     + N * (lin(d_in, d_out, p_in, p_out) + lin(d_out, d_out, p_out, p_out))
//!                     c_msg: gcn 1, sage 1, gin 2, pna 4
//! tables            = 2E + N
//! pooling           = N * ceil(d_out/gnn_p_out) * |pooling kinds|
//! mlp               = sum(lin over MLP layers)
//! ```
//!
//! BRAM18K: `sum P * ceil(ceil(D/P) * bits / 18432)` over the two embedding
//! buffers, the neighbor, offset and two degree tables (32-bit), and every
//! weight matrix and bias vector.

use serde::{Deserialize, Serialize};

use super::space::{DesignConfig, DesignContext};
use crate::model_ir::{ConvKind, GNNModelSpec, ProjectSpec};
use crate::weights::linear_slots;

pub const BRAM18K_BITS: u64 = 18_432;
const LINEAR_OVERHEAD: u64 = 10;
const TABLE_BITS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimate {
    pub latency_cycles: u64,
    pub latency_ms: f64,
    pub bram_18k: u64,
}

impl PerfEstimate {
    pub fn new(latency_cycles: u64, bram_18k: u64, clock_mhz: f64) -> Self {
        Self {
            latency_cycles,
            latency_ms: latency_ms(latency_cycles as f64, clock_mhz),
            bram_18k,
        }
    }
}

pub fn latency_ms(cycles: f64, clock_mhz: f64) -> f64 {
    cycles / (clock_mhz * 1e3)
}

fn ceil_div(a: usize, b: usize) -> u64 {
    a.div_ceil(b.max(1)) as u64
}

/// Cycles for a tiled `i -> o` linear layer.
pub fn linear_cycles(i: usize, o: usize, pi: usize, po: usize) -> u64 {
    ceil_div(i, pi) * ceil_div(o, po) + LINEAR_OVERHEAD
}

/// Messages per edge: number of aggregators touched.
pub fn message_cost(conv: ConvKind) -> u64 {
    match conv {
        ConvKind::Gcn | ConvKind::Sage => 1,
        ConvKind::Gin => 2,
        ConvKind::Pna => 4,
    }
}

/// Workload and storage shape the formulas need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workload {
    pub num_nodes: f64,
    pub num_edges: f64,
    pub max_nodes: usize,
    pub max_edges: usize,
    pub word_bits: u32,
}

impl Workload {
    pub fn of_project(p: &ProjectSpec) -> Self {
        Self {
            num_nodes: p.num_nodes_guess,
            num_edges: p.num_edges_guess,
            max_nodes: p.max_nodes,
            max_edges: p.max_edges,
            word_bits: p.numeric_mode.word_bits(),
        }
    }

    pub fn of_context(c: &DesignContext) -> Self {
        Self {
            num_nodes: c.num_nodes_guess,
            num_edges: c.num_edges_guess,
            max_nodes: c.max_nodes,
            max_edges: c.max_edges,
            word_bits: c.numeric_mode.word_bits(),
        }
    }
}

/// Per-stage latency, all in cycles before the final rounding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyBreakdown {
    pub tables: f64,
    pub conv_layers: Vec<f64>,
    pub pooling: f64,
    pub mlp: f64,
}

impl LatencyBreakdown {
    pub fn total(&self) -> u64 {
        (self.tables + self.conv_layers.iter().sum::<f64>() + self.pooling + self.mlp).ceil() as u64
    }
}

pub fn latency_breakdown(spec: &GNNModelSpec, w: &Workload) -> LatencyBreakdown {
    let (n, e) = (w.num_nodes, w.num_edges);
    let conv_layers = spec
        .gnn_layers()
        .iter()
        .map(|l| {
            let gather = e * (ceil_div(l.in_dim, l.p_in) * message_cost(spec.conv)) as f64;
            let transform = linear_cycles(l.in_dim, l.out_dim, l.p_in, l.p_out)
                + linear_cycles(l.out_dim, l.out_dim, l.p_out, l.p_out);
            gather + n * transform as f64
        })
        .collect();
    let p_out = spec.parallelism.gnn_p_out.clamp(1, spec.gnn_output_dim.max(1));
    let pooling = n * (ceil_div(spec.gnn_output_dim, p_out) * spec.pooling.len() as u64) as f64;
    let mlp = spec
        .mlp_layers()
        .iter()
        .map(|p| linear_cycles(p.in_dim, p.out_dim, p.p_in, p.p_out))
        .sum::<u64>() as f64;
    LatencyBreakdown {
        tables: 2.0 * e + n,
        conv_layers,
        pooling,
        mlp,
    }
}

pub fn latency_cycles(spec: &GNNModelSpec, w: &Workload) -> u64 {
    latency_breakdown(spec, w).total()
}

/// BRAM18K blocks for an array of `depth` words of `bits` split into `p` banks.
pub fn array_bram(depth: u64, bits: u64, p: u64) -> u64 {
    if depth == 0 {
        return 0;
    }
    let p = p.max(1);
    p * (depth.div_ceil(p) * bits).div_ceil(BRAM18K_BITS)
}

pub fn bram_18k(spec: &GNNModelSpec, w: &Workload) -> u64 {
    let bits = w.word_bits as u64;
    let emb_dim = spec.max_embedding_dim();
    let emb_p = spec.parallelism.gnn_p_hidden.clamp(1, emb_dim.max(1)) as u64;
    let emb = 2 * array_bram((w.max_nodes * emb_dim) as u64, bits, emb_p);
    let tables = array_bram(w.max_edges as u64, TABLE_BITS, 1) + 3 * array_bram(w.max_nodes as u64, TABLE_BITS, 1);
    let params: u64 = linear_slots(spec)
        .iter()
        .map(|s| {
            let p = s.plan;
            let weight = array_bram((p.in_dim * p.out_dim) as u64, bits, (p.p_in * p.p_out) as u64);
            let bias = if s.has_bias {
                array_bram(p.out_dim as u64, bits, p.p_out as u64)
            } else {
                0
            };
            weight + bias
        })
        .sum();
    emb + tables + params
}

pub fn estimate_project(p: &ProjectSpec) -> PerfEstimate {
    let w = Workload::of_project(p);
    PerfEstimate::new(latency_cycles(&p.model, &w), bram_18k(&p.model, &w), p.clock_mhz)
}

pub fn surrogate_latency(cfg: &DesignConfig, ctx: &DesignContext) -> u64 {
    latency_cycles(&cfg.to_model_spec(ctx), &Workload::of_context(ctx))
}

pub fn surrogate_bram(cfg: &DesignConfig, ctx: &DesignContext) -> u64 {
    bram_18k(&cfg.to_model_spec(ctx), &Workload::of_context(ctx))
}

pub fn surrogate_estimate(cfg: &DesignConfig, ctx: &DesignContext) -> PerfEstimate {
    let spec = cfg.to_model_spec(ctx);
    let w = Workload::of_context(ctx);
    PerfEstimate::new(latency_cycles(&spec, &w), bram_18k(&spec, &w), ctx.clock_mhz)
}

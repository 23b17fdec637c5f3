//! Brute-force reference model and random case generation shared by the
//! integration tests. Deliberately naive: every node scans the whole edge
//! list and every linear layer is a plain dense mat-vec.

#![allow(dead_code)]

use gnn_forge::graph::{generate_graph, GraphCOO, RandomGraphSpec};
use gnn_forge::model_ir::{
    ActivationKind, ConvKind, GNNModelSpec, MLPSpec, NumericMode, ParallelismSpec, PoolingKind, ProjectSpec,
};
use gnn_forge::weights::ModelWeights;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REL_TOL: f64 = 1e-5;

/// `max|a - b| / max(max|b|, 1e-12)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-12);
    diff / scale
}

pub fn mae(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len().max(1) as f64
}

fn tensor(w: &ModelWeights, name: &str) -> Vec<f64> {
    w.get(name).unwrap().data.iter().map(|&x| x as f64).collect()
}

/// `W x + b` with `W` stored `[out, in]` row-major.
fn dense(w: &ModelWeights, prefix: &str, x: &[f64], bias: bool) -> Vec<f64> {
    let wt = tensor(w, &format!("{prefix}.weight"));
    let out = wt.len() / x.len();
    let b = if bias {
        tensor(w, &format!("{prefix}.bias"))
    } else {
        vec![0.0; out]
    };
    (0..out)
        .map(|r| b[r] + (0..x.len()).map(|c| wt[r * x.len() + c] * x[c]).sum::<f64>())
        .collect()
}

/// `(source, edge id)` for every edge ending at `i`, in edge order.
fn in_edges(g: &GraphCOO, i: usize) -> Vec<(usize, usize)> {
    g.edges
        .iter()
        .enumerate()
        .filter(|(_, &(_, d))| d as usize == i)
        .map(|(e, &(s, _))| (s as usize, e))
        .collect()
}

fn oracle_conv(spec: &GNNModelSpec, layer: usize, g: &GraphCOO, w: &ModelWeights, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g.num_nodes;
    let p = |role: &str| format!("gnn.{layer}.{role}");
    let in_deg: Vec<usize> = (0..n).map(|i| in_edges(g, i).len()).collect();
    (0..n)
        .map(|i| {
            let nb = in_edges(g, i);
            let d_in = x[i].len();
            match spec.conv {
                ConvKind::Gcn => {
                    // Row i of D^-1/2 (A + I) D^-1/2 X.
                    let di = in_deg[i] as f64 + 1.0;
                    let mut h: Vec<f64> = x[i].iter().map(|v| v / di).collect();
                    for &(j, _) in &nb {
                        let c = 1.0 / ((in_deg[j] as f64 + 1.0) * di).sqrt();
                        for k in 0..d_in {
                            h[k] += c * x[j][k];
                        }
                    }
                    dense(w, &p("lin"), &h, true)
                }
                ConvKind::Sage => {
                    let mut mean = vec![0.0; d_in];
                    for &(j, _) in &nb {
                        for k in 0..d_in {
                            mean[k] += x[j][k];
                        }
                    }
                    if !nb.is_empty() {
                        mean.iter_mut().for_each(|v| *v /= nb.len() as f64);
                    }
                    let a = dense(w, &p("lin_self"), &x[i], false);
                    let b = dense(w, &p("lin_neigh"), &mean, true);
                    a.iter().zip(b).map(|(a, b)| a + b).collect()
                }
                ConvKind::Gin => {
                    let eps = tensor(w, &p("eps"))[0];
                    let edge_enc = layer == 0 && spec.input_edge_dim > 0;
                    let mut h: Vec<f64> = x[i].iter().map(|v| (1.0 + eps) * v).collect();
                    for &(j, e) in &nb {
                        let shift = if edge_enc {
                            let ef: Vec<f64> = g.edge_row(e).iter().map(|&v| v as f64).collect();
                            dense(w, &p("edge_lin"), &ef, true)
                        } else {
                            vec![0.0; d_in]
                        };
                        for k in 0..d_in {
                            h[k] += (x[j][k] + shift[k]).max(0.0);
                        }
                    }
                    let hidden: Vec<f64> = dense(w, &p("mlp0"), &h, true)
                        .into_iter()
                        .map(|v| spec.gnn_activation.eval(v))
                        .collect();
                    dense(w, &p("mlp1"), &hidden, true)
                }
                ConvKind::Pna => {
                    let delta = tensor(w, &p("delta"))[0];
                    let msgs: Vec<Vec<f64>> = nb
                        .iter()
                        .map(|&(j, _)| {
                            let cat: Vec<f64> = x[i].iter().chain(&x[j]).copied().collect();
                            dense(w, &p("phi"), &cat, true)
                        })
                        .collect();
                    let d_out = spec.layer_out_dim(layer);
                    let cnt = msgs.len() as f64;
                    let col = |k: usize| msgs.iter().map(move |m| m[k]);
                    let (mut mean, mut mn, mut mx, mut sd) =
                        (vec![0.0; d_out], vec![0.0; d_out], vec![0.0; d_out], vec![0.0; d_out]);
                    if !msgs.is_empty() {
                        for k in 0..d_out {
                            mean[k] = col(k).sum::<f64>() / cnt;
                            mn[k] = col(k).fold(f64::INFINITY, f64::min);
                            mx[k] = col(k).fold(f64::NEG_INFINITY, f64::max);
                            sd[k] = (col(k).map(|v| (v - mean[k]).powi(2)).sum::<f64>() / cnt).sqrt();
                        }
                    }
                    let d = in_deg[i] as f64;
                    let log_d = (d + 1.0).ln();
                    let amp = if delta > 0.0 { log_d / delta } else { 0.0 };
                    let att = if in_deg[i] == 0 { 0.0 } else { delta / log_d };
                    let mut input = Vec::new();
                    for s in [1.0, amp, att] {
                        for agg in [&mean, &mn, &mx, &sd] {
                            input.extend(agg.iter().map(|v| v * s));
                        }
                    }
                    input.extend_from_slice(&x[i]);
                    dense(w, &p("gamma"), &input, true)
                }
            }
        })
        .collect()
}

/// Node embeddings after the conv stack, before pooling.
pub fn oracle_embeddings(spec: &GNNModelSpec, g: &GraphCOO, w: &ModelWeights) -> Vec<Vec<f64>> {
    let mut x: Vec<Vec<f64>> = (0..g.num_nodes)
        .map(|i| g.node_row(i).iter().map(|&v| v as f64).collect())
        .collect();
    for layer in 0..spec.gnn_num_layers {
        let mut y = oracle_conv(spec, layer, g, w, &x);
        for row in &mut y {
            row.iter_mut().for_each(|v| *v = spec.gnn_activation.eval(*v));
        }
        if spec.skip_connections && spec.layer_in_dim(layer) == spec.layer_out_dim(layer) {
            for (yr, xr) in y.iter_mut().zip(&x) {
                yr.iter_mut().zip(xr).for_each(|(a, b)| *a += b);
            }
        }
        x = y;
    }
    x
}

/// Full model output, flattened (node-major for node-level models).
pub fn oracle_forward(spec: &GNNModelSpec, g: &GraphCOO, w: &ModelWeights) -> Vec<f64> {
    let x = oracle_embeddings(spec, g, w);
    let out_act = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|a| spec.output_activation.eval(a)).collect() };
    if spec.pooling.is_empty() {
        return out_act(x.concat());
    }
    let dim = x[0].len();
    let mut pooled = Vec::new();
    for kind in &spec.pooling {
        for k in 0..dim {
            let col = x.iter().map(|r| r[k]);
            pooled.push(match kind {
                PoolingKind::Sum => col.sum(),
                PoolingKind::Mean => col.sum::<f64>() / x.len() as f64,
                PoolingKind::Max => col.fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let Some(mlp) = &spec.mlp else {
        return out_act(pooled);
    };
    let mut h = pooled;
    let n = mlp.hidden_layers + 1;
    for k in 0..n {
        h = dense(w, &format!("mlp.{k}"), &h, true);
        if k + 1 < n {
            h.iter_mut().for_each(|v| *v = mlp.activation.eval(*v));
        }
    }
    out_act(h)
}

pub fn project(name: &str, model: GNNModelSpec, mode: NumericMode) -> ProjectSpec {
    ProjectSpec {
        name: name.into(),
        model,
        max_nodes: 64,
        max_edges: 256,
        num_nodes_guess: 10.0,
        num_edges_guess: 20.0,
        degree_guess: 2.0,
        numeric_mode: mode,
        clock_mhz: 300.0,
        fpga_part: gnn_forge::model_ir::DEFAULT_FPGA_PART.into(),
        build_dir: None,
    }
}

/// A graph with at most `max_nodes` nodes and `max_edges` edges.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    max_nodes: usize,
    max_edges: usize,
    node_dim: usize,
    edge_dim: usize,
) -> GraphCOO {
    let nodes = rng.gen_range(1..=max_nodes);
    let cap = (nodes * (nodes - 1)).min(max_edges);
    let edges = rng.gen_range(0..=cap);
    generate_graph(&RandomGraphSpec {
        nodes,
        edges,
        node_dim,
        edge_dim,
        self_loops: false,
        seed: rng.gen(),
    })
    .unwrap()
}

/// Random model of `kind` with dims ≤ 16 and random tiling factors.
pub fn random_model(rng: &mut ChaCha8Rng, kind: ConvKind, graph_level: bool) -> GNNModelSpec {
    let dim = |rng: &mut ChaCha8Rng| rng.gen_range(1..=16);
    let input_node_dim = dim(rng);
    let gnn_hidden_dim = dim(rng);
    let gnn_output_dim = dim(rng);
    let gnn_num_layers = rng.gen_range(1..=3);
    let acts = [
        ActivationKind::Relu,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Gelu,
    ];
    let mut pooling = Vec::new();
    let mut mlp = None;
    if graph_level {
        let mut kinds = vec![PoolingKind::Sum, PoolingKind::Mean, PoolingKind::Max];
        kinds.shuffle(rng);
        kinds.truncate(rng.gen_range(1..=3));
        pooling = kinds;
        if rng.gen_bool(0.7) {
            mlp = Some(MLPSpec {
                in_dim: gnn_output_dim * pooling.len(),
                out_dim: rng.gen_range(1..=4),
                hidden_dim: dim(rng),
                hidden_layers: rng.gen_range(0..=2),
                activation: *acts.choose(rng).unwrap(),
            });
        }
    }
    GNNModelSpec {
        input_node_dim,
        input_edge_dim: if kind == ConvKind::Gin { rng.gen_range(0..=4) } else { 0 },
        gnn_hidden_dim,
        gnn_num_layers,
        gnn_output_dim,
        conv: kind,
        gnn_activation: *acts.choose(rng).unwrap(),
        skip_connections: rng.gen_bool(0.5),
        pooling,
        mlp,
        output_activation: ActivationKind::None,
        parallelism: ParallelismSpec {
            gnn_p_in: rng.gen_range(1..=input_node_dim),
            gnn_p_hidden: rng.gen_range(1..=gnn_hidden_dim),
            gnn_p_out: rng.gen_range(1..=gnn_output_dim),
            mlp_p_in: 1,
            mlp_p_hidden: 1,
            mlp_p_out: 1,
        },
    }
}

/// Model, graph and weights from one seed. PNA gets a random positive delta.
pub fn random_case(kind: ConvKind, seed: u64, graph_level: bool) -> (GNNModelSpec, GraphCOO, ModelWeights) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_model(&mut rng, kind, graph_level);
    let g = random_graph(&mut rng, 20, 60, spec.input_node_dim, spec.input_edge_dim);
    let delta = rng.gen_range(0.5..2.5);
    let w = ModelWeights::random(&spec, rng.gen(), delta);
    (spec, g, w)
}

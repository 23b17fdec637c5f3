//! Whole-model forward: degree/neighbor tables, conv stack, pooling, MLP.

use super::arith::{Arith, FixedArith, FloatArith};
use super::conv::{conv_forward, ConvLayer, ConvParams};
use super::linear::Linear;
use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{build_neighbor_csr, compute_degree_tables, GraphCOO};
use crate::model_ir::{
    validate_project, ActivationKind, ConvKind, GNNModelSpec, LinearPlan, NumericMode, PoolingKind, ProjectSpec,
};
use crate::weights::{conv_linears, LinearSlot, ModelWeights, Stage};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput<V> {
    /// Graph-level prediction.
    Graph(Vec<V>),
    /// Node-level embeddings (no pooling head).
    Nodes(EmbeddingTable<V>),
}

impl<V: Copy> ModelOutput<V> {
    pub fn values(&self) -> &[V] {
        match self {
            ModelOutput::Graph(v) => v,
            ModelOutput::Nodes(t) => t.as_slice(),
        }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(V) -> U) -> ModelOutput<U> {
        match self {
            ModelOutput::Graph(v) => ModelOutput::Graph(v.iter().map(|&x| f(x)).collect()),
            ModelOutput::Nodes(t) => ModelOutput::Nodes(t.map(f)),
        }
    }
}

/// Elementwise `layer_in + layer_out` when widths match, else `layer_out`.
pub fn apply_skip<A: Arith>(
    arith: &A,
    layer_in: &EmbeddingTable<A::Value>,
    layer_out: EmbeddingTable<A::Value>,
) -> EmbeddingTable<A::Value> {
    if layer_in.dim() != layer_out.dim() || layer_in.rows() != layer_out.rows() {
        return layer_out;
    }
    let mut out = layer_out;
    for i in 0..out.rows() {
        for (o, &x) in out.row_mut(i).iter_mut().zip(layer_in.row(i)) {
            *o = arith.add(x, *o);
        }
    }
    out
}

/// Concatenation, in list order, of per-kind reductions over all nodes.
pub fn global_pool<A: Arith>(arith: &A, x: &EmbeddingTable<A::Value>, kinds: &[PoolingKind]) -> Result<Vec<A::Value>> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Graph("global pooling over an empty graph".into()));
    }
    let dim = x.dim();
    let mut out = Vec::with_capacity(dim * kinds.len());
    for kind in kinds {
        match kind {
            PoolingKind::Sum | PoolingKind::Mean => {
                let mut acc = vec![arith.acc_zero(); dim];
                for i in 0..n {
                    for (a, &v) in acc.iter_mut().zip(x.row(i)) {
                        *a = arith.acc_add(*a, v);
                    }
                }
                out.extend(acc.into_iter().map(|a| {
                    if *kind == PoolingKind::Sum {
                        arith.acc_finish(a)
                    } else {
                        arith.acc_mean(a, n)
                    }
                }));
            }
            PoolingKind::Max => {
                let mut m = x.row(0).to_vec();
                for i in 1..n {
                    for (a, &v) in m.iter_mut().zip(x.row(i)) {
                        *a = arith.max(*a, v);
                    }
                }
                out.extend(m);
            }
        }
    }
    Ok(out)
}

/// Linear layers with `act` between them; no activation after the last.
pub fn mlp_forward<A: Arith>(
    arith: &A,
    v: &[A::Value],
    layers: &[Linear<A::Value>],
    act: ActivationKind,
) -> Result<Vec<A::Value>> {
    let mut h = v.to_vec();
    for (k, lin) in layers.iter().enumerate() {
        h = lin.forward(arith, &h)?;
        if k + 1 < layers.len() {
            for x in &mut h {
                *x = arith.activate(*x, act);
            }
        }
    }
    Ok(h)
}

/// A model with parameters converted into one numeric domain.
#[derive(Debug, Clone)]
pub struct Simulator<A: Arith> {
    arith: A,
    spec: GNNModelSpec,
    layers: Vec<ConvLayer<A::Value>>,
    mlp: Vec<Linear<A::Value>>,
}

impl<A: Arith> Simulator<A> {
    pub fn new(arith: A, spec: &GNNModelSpec, weights: &ModelWeights) -> Result<Self> {
        weights.check(spec)?;
        let load = |name: &str| -> Result<Vec<A::Value>> {
            weights
                .get(name)?
                .data
                .iter()
                .map(|&x| arith.quantize(x as f64))
                .collect()
        };
        let linear = |s: &LinearSlot| -> Result<Linear<A::Value>> {
            let bias = s.bias_name().map(|b| load(&b)).transpose()?;
            let p = s.plan;
            Linear::new(p.in_dim, p.out_dim, p.p_in, p.p_out, load(&s.weight_name())?, bias)
        };
        let scalar = |layer: usize, name: &str| -> Result<f64> {
            let v = weights.get(&format!("gnn.{layer}.{name}"))?.scalar() as f64;
            if v.is_nan() {
                return Err(Error::NaN);
            }
            Ok(v)
        };

        let mut layers = Vec::with_capacity(spec.gnn_num_layers);
        for plan in spec.gnn_layers() {
            let slots = conv_linears(spec.conv, &plan);
            let find = |role: &str| slots.iter().find(|s| s.role == role).expect("inventory role");
            let params = match spec.conv {
                ConvKind::Gcn => ConvParams::Gcn {
                    lin: linear(find("lin"))?,
                },
                ConvKind::Sage => {
                    let self_w = load(&find("lin_self").weight_name())?;
                    let neigh = find("lin_neigh");
                    let neigh_w = load(&neigh.weight_name())?;
                    let (i, o) = (plan.in_dim, plan.out_dim);
                    let mut w = Vec::with_capacity(2 * i * o);
                    for r in 0..o {
                        w.extend_from_slice(&self_w[r * i..(r + 1) * i]);
                        w.extend_from_slice(&neigh_w[r * i..(r + 1) * i]);
                    }
                    let bias = load(&neigh.bias_name().expect("sage bias"))?;
                    let p = LinearPlan::new(2 * i, o, plan.p_in, plan.p_out);
                    ConvParams::Sage {
                        lin: Linear::new(p.in_dim, o, p.p_in, p.p_out, w, Some(bias))?,
                    }
                }
                ConvKind::Gin => ConvParams::Gin {
                    one_plus_eps: arith.quantize(1.0 + scalar(plan.index, "eps")?)?,
                    edge_lin: slots.iter().find(|s| s.role == "edge_lin").map(&linear).transpose()?,
                    mlp0: linear(find("mlp0"))?,
                    mlp1: linear(find("mlp1"))?,
                    act: spec.gnn_activation,
                },
                ConvKind::Pna => ConvParams::Pna {
                    phi: linear(find("phi"))?,
                    gamma: linear(find("gamma"))?,
                    delta: scalar(plan.index, "delta")?,
                },
            };
            layers.push(ConvLayer { plan, params });
        }

        let mlp = spec
            .mlp_layers()
            .into_iter()
            .enumerate()
            .map(|(k, plan)| {
                linear(&LinearSlot {
                    stage: Stage::Mlp,
                    layer: k,
                    role: "linear",
                    plan,
                    has_bias: true,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            arith,
            spec: spec.clone(),
            layers,
            mlp,
        })
    }

    pub fn arith(&self) -> &A {
        &self.arith
    }

    pub fn spec(&self) -> &GNNModelSpec {
        &self.spec
    }

    pub fn forward(&self, g: &GraphCOO) -> Result<ModelOutput<A::Value>> {
        let a = &self.arith;
        let spec = &self.spec;
        if g.node_dim != spec.input_node_dim {
            return Err(Error::Shape(format!(
                "graph has {}-dim node features, model expects {}",
                g.node_dim, spec.input_node_dim
            )));
        }
        let needs_edges = self.layers.iter().any(|l| l.plan.edge_dim > 0);
        if needs_edges && g.edge_dim != spec.input_edge_dim {
            return Err(Error::Shape(format!(
                "graph has {}-dim edge features, model expects {}",
                g.edge_dim, spec.input_edge_dim
            )));
        }

        let deg = compute_degree_tables(g);
        let csr = build_neighbor_csr(g, &deg);
        let quantize_all = |xs: &[f32]| -> Result<Vec<A::Value>> { xs.iter().map(|&x| a.quantize(x as f64)).collect() };
        let mut current = EmbeddingTable::from_vec(g.num_nodes, g.node_dim, quantize_all(&g.node_features)?)?;
        let edge_x = if needs_edges {
            Some(EmbeddingTable::from_vec(
                g.num_edges(),
                g.edge_dim,
                quantize_all(&g.edge_features)?,
            )?)
        } else {
            None
        };

        for layer in &self.layers {
            let mut next = conv_forward(a, layer, g, &csr, &deg, &current, edge_x.as_ref())?;
            for i in 0..next.rows() {
                for v in next.row_mut(i) {
                    *v = a.activate(*v, spec.gnn_activation);
                }
            }
            if layer.plan.skip_applies(spec) {
                next = apply_skip(a, &current, next);
            }
            current = next;
        }

        if spec.pooling.is_empty() {
            let out = current.map(|v| a.activate(v, spec.output_activation));
            return Ok(ModelOutput::Nodes(out));
        }
        let pooled = global_pool(a, &current, &spec.pooling)?;
        let head = match &spec.mlp {
            Some(mlp) => mlp_forward(a, &pooled, &self.mlp, mlp.activation)?,
            None => pooled,
        };
        Ok(ModelOutput::Graph(
            head.into_iter()
                .map(|v| a.activate(v, spec.output_activation))
                .collect(),
        ))
    }
}

fn check_inputs(proj: &ProjectSpec, g: &GraphCOO) -> Result<()> {
    let violations = validate_project(proj);
    if !violations.is_empty() {
        return Err(Error::InvalidSpec(violations.iter().map(|v| v.to_string()).collect()));
    }
    g.check_bounds(proj.max_nodes, proj.max_edges)
}

/// Run the model in `mode` and return real-valued outputs (fixed-point
/// results are dequantized).
pub fn model_forward(
    proj: &ProjectSpec,
    g: &GraphCOO,
    weights: &ModelWeights,
    mode: NumericMode,
) -> Result<ModelOutput<f64>> {
    check_inputs(proj, g)?;
    match mode {
        NumericMode::Float => Simulator::new(FloatArith, &proj.model, weights)?.forward(g),
        NumericMode::Fixed(format) => {
            let arith = FixedArith::new(format);
            let out = Simulator::new(arith, &proj.model, weights)?.forward(g)?;
            Ok(out.map(|v| arith.to_f64(v)))
        }
    }
}

/// Fixed-mode raw two's-complement outputs, the quantity compared bit for
/// bit against the generated testbench.
pub fn model_forward_raw(proj: &ProjectSpec, g: &GraphCOO, weights: &ModelWeights) -> Result<ModelOutput<i64>> {
    check_inputs(proj, g)?;
    let NumericMode::Fixed(format) = proj.numeric_mode else {
        return Err(Error::Shape("raw outputs need a fixed-point project".into()));
    };
    Simulator::new(FixedArith::new(format), &proj.model, weights)?.forward(g)
}

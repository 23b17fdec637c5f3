//! Model parameters and their on-disk layout.
//!
//! A weights directory holds `manifest.json` plus one raw little-endian
//! `f32` file per tensor. Linear weights are `[out_dim, in_dim]` row-major.
//! The same directory feeds the simulator and the generated testbench.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};
use crate::model_ir::{ConvKind, GNNModelSpec, LayerPlan, LinearPlan};

/// PNA aggregators (mean, min, max, std) times scalers (identity,
/// amplification, attenuation).
pub const PNA_AGGREGATORS: usize = 4;
pub const PNA_SCALERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Gnn,
    Mlp,
}

/// One linear layer of the model as laid out in hardware.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSlot {
    pub stage: Stage,
    pub layer: usize,
    pub role: &'static str,
    pub plan: LinearPlan,
    pub has_bias: bool,
}

impl LinearSlot {
    pub fn prefix(&self) -> String {
        match self.stage {
            Stage::Gnn => format!("gnn.{}.{}", self.layer, self.role),
            Stage::Mlp => format!("mlp.{}", self.layer),
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.prefix())
    }

    pub fn bias_name(&self) -> Option<String> {
        self.has_bias.then(|| format!("{}.bias", self.prefix()))
    }
}

fn slot(layer: usize, role: &'static str, plan: LinearPlan, has_bias: bool) -> LinearSlot {
    LinearSlot {
        stage: Stage::Gnn,
        layer,
        role,
        plan,
        has_bias,
    }
}

/// Linear layers inside one conv layer.
pub fn conv_linears(kind: ConvKind, l: &LayerPlan) -> Vec<LinearSlot> {
    let (i, o) = (l.in_dim, l.out_dim);
    match kind {
        ConvKind::Gcn => vec![slot(l.index, "lin", LinearPlan::new(i, o, l.p_in, l.p_out), true)],
        ConvKind::Sage => vec![
            slot(l.index, "lin_self", LinearPlan::new(i, o, l.p_in, l.p_out), false),
            slot(l.index, "lin_neigh", LinearPlan::new(i, o, l.p_in, l.p_out), true),
        ],
        ConvKind::Gin => {
            let mut v = Vec::new();
            if l.edge_dim > 0 {
                v.push(slot(
                    l.index,
                    "edge_lin",
                    LinearPlan::new(l.edge_dim, i, 1, l.p_in),
                    true,
                ));
            }
            v.push(slot(l.index, "mlp0", LinearPlan::new(i, o, l.p_in, l.p_out), true));
            v.push(slot(l.index, "mlp1", LinearPlan::new(o, o, l.p_out, l.p_out), true));
            v
        }
        ConvKind::Pna => vec![
            slot(l.index, "phi", LinearPlan::new(2 * i, o, l.p_in, l.p_out), true),
            slot(
                l.index,
                "gamma",
                LinearPlan::new(PNA_AGGREGATORS * PNA_SCALERS * o + i, o, l.p_out, l.p_out),
                true,
            ),
        ],
    }
}

/// Scalar parameters of one conv layer (stored as 1-element tensors).
pub fn conv_scalars(kind: ConvKind) -> &'static [&'static str] {
    match kind {
        ConvKind::Gin => &["eps"],
        ConvKind::Pna => &["delta"],
        _ => &[],
    }
}

pub fn linear_slots(spec: &GNNModelSpec) -> Vec<LinearSlot> {
    let mut slots: Vec<LinearSlot> = spec
        .gnn_layers()
        .iter()
        .flat_map(|l| conv_linears(spec.conv, l))
        .collect();
    slots.extend(spec.mlp_layers().into_iter().enumerate().map(|(k, plan)| LinearSlot {
        stage: Stage::Mlp,
        layer: k,
        role: "linear",
        plan,
        has_bias: true,
    }));
    slots
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub stage: Stage,
    pub layer: usize,
    pub role: String,
    pub shape: Vec<usize>,
}

/// Every tensor a model needs, in canonical order.
pub fn tensor_inventory(spec: &GNNModelSpec) -> Vec<TensorSpec> {
    let mut out = Vec::new();
    let push_slot = |s: &LinearSlot, out: &mut Vec<TensorSpec>| {
        let role = match s.stage {
            Stage::Gnn => s.role.to_string(),
            Stage::Mlp => "linear".to_string(),
        };
        out.push(TensorSpec {
            name: s.weight_name(),
            stage: s.stage,
            layer: s.layer,
            role: format!("{role}.weight"),
            shape: vec![s.plan.out_dim, s.plan.in_dim],
        });
        if let Some(name) = s.bias_name() {
            out.push(TensorSpec {
                name,
                stage: s.stage,
                layer: s.layer,
                role: format!("{role}.bias"),
                shape: vec![s.plan.out_dim],
            });
        }
    };
    for l in spec.gnn_layers() {
        for s in conv_linears(spec.conv, &l) {
            push_slot(&s, &mut out);
        }
        for &name in conv_scalars(spec.conv) {
            out.push(TensorSpec {
                name: format!("gnn.{}.{name}", l.index),
                stage: Stage::Gnn,
                layer: l.index,
                role: name.to_string(),
                shape: vec![1],
            });
        }
    }
    for s in linear_slots(spec).iter().filter(|s| s.stage == Stage::Mlp) {
        push_slot(s, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Weights(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(&self) -> f32 {
        self.data[0]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelWeights {
    pub tensors: BTreeMap<String, Tensor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    stage: Stage,
    layer: usize,
    role: String,
    shape: Vec<usize>,
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightsManifest {
    format: String,
    version: u32,
    tensors: Vec<ManifestEntry>,
}

const WEIGHTS_FORMAT: &str = "gnnb-weights";

impl ModelWeights {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor `{name}`")))
    }

    /// Exactly the tensors of `tensor_inventory(spec)` with matching shapes.
    pub fn check(&self, spec: &GNNModelSpec) -> Result<()> {
        let inventory = tensor_inventory(spec);
        for t in &inventory {
            let have = self.get(&t.name)?;
            if have.shape != t.shape {
                return Err(Error::Weights(format!(
                    "tensor `{}` has shape {:?}, model expects {:?}",
                    t.name, have.shape, t.shape
                )));
            }
        }
        if let Some(extra) = self.tensors.keys().find(|k| !inventory.iter().any(|t| &t.name == *k)) {
            return Err(Error::Weights(format!("unexpected tensor `{extra}`")));
        }
        Ok(())
    }

    /// Uniform `±1/sqrt(fan_in)` weights and biases; GIN `eps` uniform in
    /// [0, 0.5); every PNA layer gets `pna_delta`.
    pub fn random(spec: &GNNModelSpec, seed: u64, pna_delta: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for t in tensor_inventory(spec) {
            let n: usize = t.shape.iter().product();
            let data: Vec<f32> = if t.role == "eps" {
                vec![rng.gen_range(0.0..0.5)]
            } else if t.role == "delta" {
                vec![pna_delta as f32]
            } else {
                let fan_in = if t.shape.len() == 2 {
                    t.shape[1]
                } else {
                    bias_fan_in(spec, &t)
                };
                let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            tensors.insert(t.name.clone(), Tensor { shape: t.shape, data });
        }
        Self { tensors }
    }

    pub fn save(&self, spec: &GNNModelSpec, dir: &Path) -> Result<()> {
        self.check(spec)?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::new();
        for t in tensor_inventory(spec) {
            let tensor = self.get(&t.name)?;
            let file = format!("{}.bin", t.name);
            let bytes: Vec<u8> = tensor.data.iter().flat_map(|x| x.to_le_bytes()).collect();
            let path = dir.join(&file);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            entries.push(ManifestEntry {
                name: t.name,
                stage: t.stage,
                layer: t.layer,
                role: t.role,
                shape: t.shape,
                file,
            });
        }
        let manifest = WeightsManifest {
            format: WEIGHTS_FORMAT.into(),
            version: 1,
            tensors: entries,
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: WeightsManifest = from_json_str("weights manifest", &text)?;
        if manifest.format != WEIGHTS_FORMAT || manifest.version != 1 {
            return Err(Error::Weights(format!(
                "unsupported manifest format {} v{}",
                manifest.format, manifest.version
            )));
        }
        let mut tensors = BTreeMap::new();
        for entry in manifest.tensors {
            let path = dir.join(&entry.file);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if bytes.len() % 4 != 0 {
                return Err(Error::Weights(format!(
                    "{}: length not a multiple of 4",
                    path.display()
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(entry.name, Tensor::new(entry.shape, data)?);
        }
        Ok(Self { tensors })
    }
}

fn bias_fan_in(spec: &GNNModelSpec, t: &TensorSpec) -> usize {
    let weight_name = t.name.trim_end_matches(".bias").to_string() + ".weight";
    tensor_inventory(spec)
        .into_iter()
        .find(|w| w.name == weight_name)
        .map(|w| w.shape[1])
        .unwrap_or(1)
}

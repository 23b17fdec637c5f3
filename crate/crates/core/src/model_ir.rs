//! Declarative model and project specifications.
//!
//! A [`GNNModelSpec`] describes the backbone (conv layers, activation, skip
//! connections), the optional global pooling + MLP head and the tiling
//! factors. A [`ProjectSpec`] wraps a model with buffer bounds, workload
//! guesses and the numeric mode. Both are read from JSON.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{from_json_str, Error, Result};
use crate::fixed_point::FixedPointFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvKind {
    Gcn,
    Gin,
    Pna,
    Sage,
}

impl ConvKind {
    pub const ALL: [ConvKind; 4] = [ConvKind::Gcn, ConvKind::Gin, ConvKind::Pna, ConvKind::Sage];

    pub fn name(&self) -> &'static str {
        match self {
            ConvKind::Gcn => "gcn",
            ConvKind::Gin => "gin",
            ConvKind::Pna => "pna",
            ConvKind::Sage => "sage",
        }
    }
}

impl fmt::Display for ConvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
    Gelu,
    None,
}

impl ActivationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Gelu => "gelu",
            ActivationKind::None => "none",
        }
    }

    /// Reference real-valued definition, shared by both numeric modes.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Gelu => 0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)),
            ActivationKind::None => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingKind {
    #[serde(alias = "add")]
    Sum,
    Mean,
    Max,
}

impl PoolingKind {
    pub fn name(&self) -> &'static str {
        match self {
            PoolingKind::Sum => "sum",
            PoolingKind::Mean => "mean",
            PoolingKind::Max => "max",
        }
    }
}

/// Ordered pooling kinds; concatenation order equals list order.
pub type PoolingSpec = Vec<PoolingKind>;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelismSpec {
    #[serde(default = "one")]
    pub gnn_p_in: usize,
    #[serde(default = "one")]
    pub gnn_p_hidden: usize,
    #[serde(default = "one")]
    pub gnn_p_out: usize,
    #[serde(default = "one")]
    pub mlp_p_in: usize,
    #[serde(default = "one")]
    pub mlp_p_hidden: usize,
    #[serde(default = "one")]
    pub mlp_p_out: usize,
}

impl Default for ParallelismSpec {
    fn default() -> Self {
        Self {
            gnn_p_in: 1,
            gnn_p_hidden: 1,
            gnn_p_out: 1,
            mlp_p_in: 1,
            mlp_p_hidden: 1,
            mlp_p_out: 1,
        }
    }
}

fn relu() -> ActivationKind {
    ActivationKind::Relu
}

fn no_activation() -> ActivationKind {
    ActivationKind::None
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MLPSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_dim: usize,
    /// Hidden linear layers between input and output; 0 means one in->out layer.
    pub hidden_layers: usize,
    #[serde(default = "relu")]
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GNNModelSpec {
    pub input_node_dim: usize,
    #[serde(default)]
    pub input_edge_dim: usize,
    pub gnn_hidden_dim: usize,
    pub gnn_num_layers: usize,
    pub gnn_output_dim: usize,
    pub conv: ConvKind,
    #[serde(default = "relu")]
    pub gnn_activation: ActivationKind,
    #[serde(default)]
    pub skip_connections: bool,
    #[serde(default)]
    pub pooling: PoolingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp: Option<MLPSpec>,
    #[serde(default = "no_activation")]
    pub output_activation: ActivationKind,
    #[serde(default)]
    pub parallelism: ParallelismSpec,
}

/// One linear layer with its (clamped) tiling factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearPlan {
    pub in_dim: usize,
    pub out_dim: usize,
    pub p_in: usize,
    pub p_out: usize,
}

impl LinearPlan {
    pub fn new(in_dim: usize, out_dim: usize, p_in: usize, p_out: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            p_in: p_in.clamp(1, in_dim.max(1)),
            p_out: p_out.clamp(1, out_dim.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerPlan {
    pub index: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub p_in: usize,
    pub p_out: usize,
    /// Edge features enter this layer (GIN, layer 0 only).
    pub edge_dim: usize,
}

impl LayerPlan {
    /// Skip-add is applied only when the layer preserves width.
    pub fn skip_applies(&self, spec: &GNNModelSpec) -> bool {
        spec.skip_connections && self.in_dim == self.out_dim
    }
}

impl GNNModelSpec {
    pub fn layer_in_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_node_dim
        } else {
            self.gnn_hidden_dim
        }
    }

    pub fn layer_out_dim(&self, layer: usize) -> usize {
        if layer + 1 == self.gnn_num_layers {
            self.gnn_output_dim
        } else {
            self.gnn_hidden_dim
        }
    }

    pub fn gnn_layers(&self) -> Vec<LayerPlan> {
        let p = &self.parallelism;
        (0..self.gnn_num_layers)
            .map(|i| {
                let in_dim = self.layer_in_dim(i);
                let out_dim = self.layer_out_dim(i);
                let p_in = if i == 0 { p.gnn_p_in } else { p.gnn_p_hidden };
                let p_out = if i + 1 == self.gnn_num_layers {
                    p.gnn_p_out
                } else {
                    p.gnn_p_hidden
                };
                let edge_dim = if i == 0 && self.conv == ConvKind::Gin {
                    self.input_edge_dim
                } else {
                    0
                };
                LayerPlan {
                    index: i,
                    in_dim,
                    out_dim,
                    p_in: p_in.clamp(1, in_dim.max(1)),
                    p_out: p_out.clamp(1, out_dim.max(1)),
                    edge_dim,
                }
            })
            .collect()
    }

    /// Linear layers of the MLP head, `hidden_layers + 1` of them.
    pub fn mlp_layers(&self) -> Vec<LinearPlan> {
        let Some(mlp) = &self.mlp else {
            return Vec::new();
        };
        let p = &self.parallelism;
        let n = mlp.hidden_layers + 1;
        (0..n)
            .map(|k| {
                let in_dim = if k == 0 { mlp.in_dim } else { mlp.hidden_dim };
                let out_dim = if k + 1 == n { mlp.out_dim } else { mlp.hidden_dim };
                let p_in = if k == 0 { p.mlp_p_in } else { p.mlp_p_hidden };
                let p_out = if k + 1 == n { p.mlp_p_out } else { p.mlp_p_hidden };
                LinearPlan::new(in_dim, out_dim, p_in, p_out)
            })
            .collect()
    }

    /// Width of the double-buffered embedding tables.
    pub fn max_embedding_dim(&self) -> usize {
        self.input_node_dim.max(self.gnn_hidden_dim).max(self.gnn_output_dim)
    }

    pub fn is_graph_level(&self) -> bool {
        !self.pooling.is_empty()
    }

    /// Length of the model output for graph-level tasks.
    pub fn graph_output_dim(&self) -> usize {
        match &self.mlp {
            Some(m) => m.out_dim,
            None => self.gnn_output_dim * self.pooling.len(),
        }
    }
}

/// Float reference or a fixed-point format. Serialized as `"float"` or
/// `"fixed<W,I>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericMode {
    Float,
    Fixed(FixedPointFormat),
}

impl NumericMode {
    /// Storage width of one datum in hardware buffers (float mode is `double`).
    pub fn word_bits(&self) -> u32 {
        match self {
            NumericMode::Float => 64,
            NumericMode::Fixed(f) => f.total_bits(),
        }
    }
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericMode::Float => f.write_str("float"),
            NumericMode::Fixed(fmt) => write!(f, "{fmt}"),
        }
    }
}

impl FromStr for NumericMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "float" {
            Ok(NumericMode::Float)
        } else {
            Ok(NumericMode::Fixed(s.parse()?))
        }
    }
}

impl Serialize for NumericMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NumericMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_FPGA_PART: &str = "xcu280-fsvh2892-2L-e";

fn default_clock() -> f64 {
    300.0
}

fn default_part() -> String {
    DEFAULT_FPGA_PART.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSpec {
    pub name: String,
    pub model: GNNModelSpec,
    pub max_nodes: usize,
    pub max_edges: usize,
    pub num_nodes_guess: f64,
    pub num_edges_guess: f64,
    pub degree_guess: f64,
    pub numeric_mode: NumericMode,
    #[serde(default = "default_clock")]
    pub clock_mhz: f64,
    #[serde(default = "default_part")]
    pub fpga_part: String,
    /// Where generated sources go; defaults to `build/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_dir: Option<PathBuf>,
}

impl ProjectSpec {
    pub fn build_dir(&self) -> PathBuf {
        self.build_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("build").join(&self.name))
    }
}

pub fn parse_model_spec(text: &str) -> Result<GNNModelSpec> {
    from_json_str("model spec", text)
}

/// Byte-level entry point: invalid UTF-8 is a diagnostic, not a panic.
pub fn parse_model_spec_bytes(bytes: &[u8]) -> Result<GNNModelSpec> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        context: "model spec",
        path: ".".into(),
        line: 0,
        column: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;
    parse_model_spec(text)
}

pub fn parse_project_spec(text: &str) -> Result<ProjectSpec> {
    from_json_str("project spec", text)
}

pub fn load_project_spec(path: &std::path::Path) -> Result<ProjectSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_project_spec(&text)
}

/// A single violated invariant, e.g. `mlp.in_dim expected 16, got 8`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.message)
    }
}

pub fn validate_model_spec(spec: &GNNModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let positive = [
        ("input_node_dim", spec.input_node_dim),
        ("gnn_hidden_dim", spec.gnn_hidden_dim),
        ("gnn_num_layers", spec.gnn_num_layers),
        ("gnn_output_dim", spec.gnn_output_dim),
    ];
    for (field, v) in positive {
        if v == 0 {
            out.push(Violation::new(field, "must be >= 1"));
        }
    }
    if spec.gnn_activation == ActivationKind::None {
        out.push(Violation::new(
            "gnn_activation",
            "`none` is only legal as output_activation",
        ));
    }

    for (i, kind) in spec.pooling.iter().enumerate() {
        if spec.pooling[..i].contains(kind) {
            out.push(Violation::new(
                "pooling",
                format!("duplicate pooling kind `{}`", kind.name()),
            ));
        }
    }

    match (&spec.mlp, spec.pooling.is_empty()) {
        (Some(_), true) => out.push(Violation::new(
            "mlp",
            "present but pooling is empty (node-level models have no MLP head)",
        )),
        (Some(mlp), false) => {
            let expected = spec.gnn_output_dim * spec.pooling.len();
            if mlp.in_dim != expected {
                out.push(Violation::new(
                    "mlp.in_dim",
                    format!("expected {expected}, got {}", mlp.in_dim),
                ));
            }
            for (field, v) in [("mlp.out_dim", mlp.out_dim), ("mlp.hidden_dim", mlp.hidden_dim)] {
                if v == 0 {
                    out.push(Violation::new(field, "must be >= 1"));
                }
            }
            if mlp.activation == ActivationKind::None {
                out.push(Violation::new(
                    "mlp.activation",
                    "`none` is only legal as output_activation",
                ));
            }
        }
        (None, _) => {}
    }

    let p = &spec.parallelism;
    let mut factors = vec![
        (
            "parallelism.gnn_p_in",
            p.gnn_p_in,
            "input_node_dim",
            spec.input_node_dim,
        ),
        (
            "parallelism.gnn_p_hidden",
            p.gnn_p_hidden,
            "gnn_hidden_dim",
            spec.gnn_hidden_dim,
        ),
        (
            "parallelism.gnn_p_out",
            p.gnn_p_out,
            "gnn_output_dim",
            spec.gnn_output_dim,
        ),
    ];
    if let Some(mlp) = &spec.mlp {
        factors.extend([
            ("parallelism.mlp_p_in", p.mlp_p_in, "mlp.in_dim", mlp.in_dim),
            (
                "parallelism.mlp_p_hidden",
                p.mlp_p_hidden,
                "mlp.hidden_dim",
                mlp.hidden_dim,
            ),
            ("parallelism.mlp_p_out", p.mlp_p_out, "mlp.out_dim", mlp.out_dim),
        ]);
    }
    for (field, factor, dim_name, dim) in factors {
        if factor == 0 {
            out.push(Violation::new(field, "must be >= 1"));
        } else if dim > 0 && factor > dim {
            out.push(Violation::new(field, format!("{factor} exceeds {dim_name} = {dim}")));
        }
    }
    out
}

/// Project-level checks plus every model violation.
pub fn validate_project(proj: &ProjectSpec) -> Vec<Violation> {
    let mut out = validate_model_spec(&proj.model);
    let ident_ok = proj
        .name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && proj.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ident_ok {
        out.push(Violation::new("name", "must be a C identifier"));
    }
    if proj.max_nodes == 0 {
        out.push(Violation::new("max_nodes", "must be >= 1"));
    }
    if proj.max_edges == 0 {
        out.push(Violation::new("max_edges", "must be >= 1"));
    }
    let guesses = [
        ("num_nodes_guess", proj.num_nodes_guess, Some(proj.max_nodes)),
        ("num_edges_guess", proj.num_edges_guess, Some(proj.max_edges)),
        ("degree_guess", proj.degree_guess, None),
    ];
    for (field, v, max) in guesses {
        if !(v.is_finite() && v > 0.0) {
            out.push(Violation::new(field, "must be a positive real"));
        } else if let Some(max) = max {
            if v > max as f64 {
                out.push(Violation::new(field, format!("{v} exceeds maximum {max}")));
            }
        }
    }
    if !(proj.clock_mhz.is_finite() && proj.clock_mhz > 0.0) {
        out.push(Violation::new("clock_mhz", "must be a positive real"));
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const HIV_SAGE: &str = r#"{
        "input_node_dim": 9,
        "input_edge_dim": 3,
        "gnn_hidden_dim": 16,
        "gnn_num_layers": 2,
        "gnn_output_dim": 8,
        "conv": "sage",
        "gnn_activation": "relu",
        "skip_connections": true,
        "pooling": ["add", "mean", "max"],
        "mlp": {"in_dim": 24, "out_dim": 2, "hidden_dim": 8, "hidden_layers": 3, "activation": "relu"},
        "output_activation": "none",
        "parallelism": {"gnn_p_in": 1, "gnn_p_hidden": 8, "gnn_p_out": 4,
                        "mlp_p_in": 8, "mlp_p_hidden": 4, "mlp_p_out": 1}
    }"#;

    #[test]
    fn parses_hiv_sage_model() {
        let spec = parse_model_spec(HIV_SAGE).unwrap();
        assert_eq!(spec.mlp.as_ref().unwrap().in_dim, 24);
        assert_eq!(
            spec.pooling,
            vec![PoolingKind::Sum, PoolingKind::Mean, PoolingKind::Max]
        );
        assert_eq!(spec.conv, ConvKind::Sage);
        assert!(validate_model_spec(&spec).is_empty());
        // hidden_layers=3 means four weight matrices
        assert_eq!(spec.mlp_layers().len(), 4);
    }

    #[test]
    fn minimal_spec_gets_defaults() {
        let text = r#"{"input_node_dim":1,"gnn_hidden_dim":1,"gnn_num_layers":1,"gnn_output_dim":1,
            "conv":"gcn","pooling":["sum"],
            "mlp":{"in_dim":1,"out_dim":1,"hidden_dim":1,"hidden_layers":0}}"#;
        let spec = parse_model_spec(text).unwrap();
        assert_eq!(spec.parallelism, ParallelismSpec::default());
        assert_eq!(spec.output_activation, ActivationKind::None);
        assert_eq!(spec.input_edge_dim, 0);
        assert!(validate_model_spec(&spec).is_empty());
    }

    #[test]
    fn unknown_conv_names_the_field() {
        let text = HIV_SAGE.replace("\"sage\"", "\"gat\"");
        let err = parse_model_spec(&text).unwrap_err();
        match err {
            Error::Parse { path, message, .. } => {
                assert_eq!(path, "conv");
                assert!(message.contains("gat"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_model_spec("{\n  \"conv\": ,\n}").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_reported() {
        let err = parse_model_spec(r#"{"input_node_dim": 1}"#).unwrap_err();
        assert!(err.to_string().contains("missing field"), "{err}");
    }

    #[test]
    fn mlp_in_dim_mismatch() {
        let mut spec = parse_model_spec(HIV_SAGE).unwrap();
        spec.pooling = vec![PoolingKind::Sum, PoolingKind::Mean];
        spec.mlp.as_mut().unwrap().in_dim = 8;
        let v = validate_model_spec(&spec);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].to_string(), "mlp.in_dim expected 16, got 8");
    }

    #[test]
    fn parallelism_exceeding_dim() {
        let mut spec = parse_model_spec(HIV_SAGE).unwrap();
        spec.parallelism.gnn_p_hidden = 32;
        let v = validate_model_spec(&spec);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "parallelism.gnn_p_hidden");
    }

    #[test]
    fn non_dividing_factor_is_allowed() {
        let mut spec = parse_model_spec(HIV_SAGE).unwrap();
        spec.parallelism.gnn_p_hidden = 3;
        assert!(validate_model_spec(&spec).is_empty());
    }

    #[test]
    fn mlp_without_pooling_and_duplicates() {
        let mut spec = parse_model_spec(HIV_SAGE).unwrap();
        spec.pooling.clear();
        let v = validate_model_spec(&spec);
        assert!(v.iter().any(|v| v.field == "mlp"), "{v:?}");

        let mut spec = parse_model_spec(HIV_SAGE).unwrap();
        spec.pooling = vec![PoolingKind::Sum, PoolingKind::Sum, PoolingKind::Max];
        let v = validate_model_spec(&spec);
        assert!(v.iter().any(|v| v.field == "pooling"), "{v:?}");
    }

    #[test]
    fn none_activation_only_at_output() {
        let mut spec = parse_model_spec(HIV_SAGE).unwrap();
        spec.gnn_activation = ActivationKind::None;
        assert_eq!(validate_model_spec(&spec)[0].field, "gnn_activation");
    }

    #[test]
    fn project_checks() {
        let model = parse_model_spec(HIV_SAGE).unwrap();
        let mut proj = ProjectSpec {
            name: "gnn_model".into(),
            model,
            max_nodes: 600,
            max_edges: 600,
            num_nodes_guess: 25.0,
            num_edges_guess: 54.0,
            degree_guess: 2.1,
            numeric_mode: NumericMode::Fixed(FixedPointFormat::new(32, 16).unwrap()),
            clock_mhz: 300.0,
            fpga_part: DEFAULT_FPGA_PART.into(),
            build_dir: None,
        };
        assert!(validate_project(&proj).is_empty());
        let text = serde_json::to_string(&proj).unwrap();
        assert!(text.contains("\"fixed<32,16>\""));
        assert_eq!(parse_project_spec(&text).unwrap(), proj);

        proj.num_nodes_guess = 700.0;
        proj.name = "1bad-name".into();
        let v = validate_project(&proj);
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn layer_chain() {
        let spec = parse_model_spec(HIV_SAGE).unwrap();
        let layers = spec.gnn_layers();
        assert_eq!((layers[0].in_dim, layers[0].out_dim), (9, 16));
        assert_eq!((layers[1].in_dim, layers[1].out_dim), (16, 8));
        assert_eq!((layers[0].p_in, layers[0].p_out), (1, 8));
        assert_eq!((layers[1].p_in, layers[1].p_out), (8, 4));
        assert!(!layers[0].skip_applies(&spec));
        assert!(!layers[1].skip_applies(&spec));
    }

    pub(crate) fn arb_model_spec() -> impl Strategy<Value = GNNModelSpec> {
        (
            (1usize..20, 0usize..4, 1usize..20, 1usize..5, 1usize..20),
            prop::sample::select(ConvKind::ALL.to_vec()),
            any::<bool>(),
            prop::sample::subsequence(vec![PoolingKind::Sum, PoolingKind::Mean, PoolingKind::Max], 0..=3),
            (1usize..10, 1usize..10, 0usize..4),
            (1usize..4, 1usize..4, 1usize..4),
        )
            .prop_map(
                |((inp, edge, hid, layers, out), conv, skip, pooling, (mo, mh, ml), (a, b, c))| {
                    let mlp = (!pooling.is_empty()).then(|| MLPSpec {
                        in_dim: out * pooling.len(),
                        out_dim: mo,
                        hidden_dim: mh,
                        hidden_layers: ml,
                        activation: ActivationKind::Relu,
                    });
                    GNNModelSpec {
                        input_node_dim: inp,
                        input_edge_dim: edge,
                        gnn_hidden_dim: hid,
                        gnn_num_layers: layers,
                        gnn_output_dim: out,
                        conv,
                        gnn_activation: ActivationKind::Tanh,
                        skip_connections: skip,
                        pooling,
                        mlp,
                        output_activation: ActivationKind::Sigmoid,
                        parallelism: ParallelismSpec {
                            gnn_p_in: a.min(inp),
                            gnn_p_hidden: b.min(hid),
                            gnn_p_out: c.min(out),
                            mlp_p_in: 1,
                            mlp_p_hidden: b.min(mh),
                            mlp_p_out: 1,
                        },
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(spec in arb_model_spec()) {
            let text = serde_json::to_string_pretty(&spec).unwrap();
            prop_assert_eq!(parse_model_spec(&text).unwrap(), spec);
        }

        #[test]
        fn valid_specs_have_consistent_dim_chain(spec in arb_model_spec()) {
            prop_assume!(validate_model_spec(&spec).is_empty());
            let layers = spec.gnn_layers();
            prop_assert_eq!(layers[0].in_dim, spec.input_node_dim);
            prop_assert_eq!(layers.last().unwrap().out_dim, spec.gnn_output_dim);
            for w in layers.windows(2) {
                prop_assert_eq!(w[0].out_dim, w[1].in_dim);
            }
            let mlp = spec.mlp_layers();
            for w in mlp.windows(2) {
                prop_assert_eq!(w[0].out_dim, w[1].in_dim);
            }
        }

        #[test]
        fn parsing_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_model_spec_bytes(&bytes);
        }

        #[test]
        fn parsing_mutated_json_never_panics(cut in 0usize..600, ch in any::<char>()) {
            let mut text: Vec<char> = HIV_SAGE.chars().collect();
            let at = cut % text.len();
            text[at] = ch;
            let s: String = text.into_iter().collect();
            let _ = parse_model_spec(&s);
        }
    }
}

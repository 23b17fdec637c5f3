//! Design points, the space they are drawn from, and the fixed context
//! (dataset shape, buffer bounds, numeric format) they are evaluated in.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};
use crate::model_ir::{
    ActivationKind, ConvKind, GNNModelSpec, MLPSpec, NumericMode, ParallelismSpec, PoolingKind, ProjectSpec,
    DEFAULT_FPGA_PART,
};

/// One architecture/parallelism choice. Field order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub conv: ConvKind,
    pub gnn_hidden_dim: usize,
    pub gnn_out_dim: usize,
    pub gnn_num_layers: usize,
    pub skip: bool,
    pub mlp_hidden_dim: usize,
    /// Hidden layers of the MLP head.
    pub mlp_num_layers: usize,
    pub gnn_p_hidden: usize,
    pub gnn_p_out: usize,
    pub mlp_p_in: usize,
    pub mlp_p_hidden: usize,
}

/// Everything a [`DesignConfig`] leaves open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignContext {
    pub input_node_dim: usize,
    pub output_dim: usize,
    pub max_nodes: usize,
    pub max_edges: usize,
    pub num_nodes_guess: f64,
    pub num_edges_guess: f64,
    pub degree_guess: f64,
    pub pooling: Vec<PoolingKind>,
    pub gnn_p_in: usize,
    pub mlp_p_out: usize,
    pub numeric_mode: NumericMode,
    pub clock_mhz: f64,
}

impl Default for DesignContext {
    /// Molecular-property benchmark shape: 11 input features, 19 targets,
    /// ~18 nodes and ~37 edges per graph.
    fn default() -> Self {
        Self {
            input_node_dim: 11,
            output_dim: 19,
            max_nodes: 600,
            max_edges: 600,
            num_nodes_guess: 18.0,
            num_edges_guess: 37.0,
            degree_guess: 2.0,
            pooling: vec![PoolingKind::Sum, PoolingKind::Mean, PoolingKind::Max],
            gnn_p_in: 1,
            mlp_p_out: 1,
            numeric_mode: NumericMode::Fixed("fixed<16,10>".parse().expect("valid format")),
            clock_mhz: 300.0,
        }
    }
}

impl DesignConfig {
    pub fn to_model_spec(&self, ctx: &DesignContext) -> GNNModelSpec {
        let pooled = self.gnn_out_dim * ctx.pooling.len();
        GNNModelSpec {
            input_node_dim: ctx.input_node_dim,
            input_edge_dim: 0,
            gnn_hidden_dim: self.gnn_hidden_dim,
            gnn_num_layers: self.gnn_num_layers,
            gnn_output_dim: self.gnn_out_dim,
            conv: self.conv,
            gnn_activation: ActivationKind::Relu,
            skip_connections: self.skip,
            pooling: ctx.pooling.clone(),
            mlp: (!ctx.pooling.is_empty()).then_some(MLPSpec {
                in_dim: pooled,
                out_dim: ctx.output_dim,
                hidden_dim: self.mlp_hidden_dim,
                hidden_layers: self.mlp_num_layers,
                activation: ActivationKind::Relu,
            }),
            output_activation: ActivationKind::None,
            parallelism: ParallelismSpec {
                gnn_p_in: ctx.gnn_p_in,
                gnn_p_hidden: self.gnn_p_hidden,
                gnn_p_out: self.gnn_p_out,
                mlp_p_in: self.mlp_p_in,
                mlp_p_hidden: self.mlp_p_hidden,
                mlp_p_out: ctx.mlp_p_out,
            },
        }
    }

    pub fn to_project(&self, ctx: &DesignContext, name: &str) -> ProjectSpec {
        ProjectSpec {
            name: name.to_string(),
            model: self.to_model_spec(ctx),
            max_nodes: ctx.max_nodes,
            max_edges: ctx.max_edges,
            num_nodes_guess: ctx.num_nodes_guess,
            num_edges_guess: ctx.num_edges_guess,
            degree_guess: ctx.degree_guess,
            numeric_mode: ctx.numeric_mode,
            clock_mhz: ctx.clock_mhz,
            fpga_part: DEFAULT_FPGA_PART.to_string(),
            build_dir: None,
        }
    }
}

impl DesignContext {
    /// Context matching an existing project (its dims, bounds and guesses).
    pub fn from_project(proj: &ProjectSpec) -> Self {
        let m = &proj.model;
        Self {
            input_node_dim: m.input_node_dim,
            output_dim: m.mlp.as_ref().map_or(m.gnn_output_dim, |x| x.out_dim),
            max_nodes: proj.max_nodes,
            max_edges: proj.max_edges,
            num_nodes_guess: proj.num_nodes_guess,
            num_edges_guess: proj.num_edges_guess,
            degree_guess: proj.degree_guess,
            pooling: m.pooling.clone(),
            gnn_p_in: m.parallelism.gnn_p_in,
            mlp_p_out: m.parallelism.mlp_p_out,
            numeric_mode: proj.numeric_mode,
            clock_mhz: proj.clock_mhz,
        }
    }
}

/// Candidate values per field. The full product is the design space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpace {
    pub conv: Vec<ConvKind>,
    pub gnn_hidden_dim: Vec<usize>,
    pub gnn_out_dim: Vec<usize>,
    pub gnn_num_layers: Vec<usize>,
    pub skip: Vec<bool>,
    pub mlp_hidden_dim: Vec<usize>,
    pub mlp_num_layers: Vec<usize>,
    pub gnn_p_hidden: Vec<usize>,
    pub gnn_p_out: Vec<usize>,
    pub mlp_p_in: Vec<usize>,
    pub mlp_p_hidden: Vec<usize>,
}

impl DesignSpace {
    /// The benchmark search space (279,936 points).
    pub fn benchmark() -> Self {
        Self {
            conv: ConvKind::ALL.to_vec(),
            gnn_hidden_dim: vec![64, 128, 256],
            gnn_out_dim: vec![64, 128, 256],
            gnn_num_layers: vec![1, 2, 3, 4],
            skip: vec![true, false],
            mlp_hidden_dim: vec![64, 128, 256],
            mlp_num_layers: vec![1, 2, 3, 4],
            gnn_p_hidden: vec![2, 4, 8],
            gnn_p_out: vec![2, 4, 8],
            mlp_p_in: vec![2, 4, 8],
            mlp_p_hidden: vec![2, 4, 8],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let space: Self = from_json_str("design space", text)?;
        space.validate()?;
        Ok(space)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn radices(&self) -> [usize; 11] {
        [
            self.conv.len(),
            self.gnn_hidden_dim.len(),
            self.gnn_out_dim.len(),
            self.gnn_num_layers.len(),
            self.skip.len(),
            self.mlp_hidden_dim.len(),
            self.mlp_num_layers.len(),
            self.gnn_p_hidden.len(),
            self.gnn_p_out.len(),
            self.mlp_p_in.len(),
            self.mlp_p_hidden.len(),
        ]
    }

    /// Non-empty fields without duplicates, positive sizes and factors.
    pub fn validate(&self) -> Result<()> {
        const NAMES: [&str; 11] = [
            "conv",
            "gnn_hidden_dim",
            "gnn_out_dim",
            "gnn_num_layers",
            "skip",
            "mlp_hidden_dim",
            "mlp_num_layers",
            "gnn_p_hidden",
            "gnn_p_out",
            "mlp_p_in",
            "mlp_p_hidden",
        ];
        for (name, n) in NAMES.iter().zip(self.radices()) {
            if n == 0 {
                return Err(Error::Space(format!("`{name}` has no candidates")));
            }
        }
        let numeric: [(&str, &Vec<usize>, usize); 9] = [
            ("gnn_hidden_dim", &self.gnn_hidden_dim, 1),
            ("gnn_out_dim", &self.gnn_out_dim, 1),
            ("gnn_num_layers", &self.gnn_num_layers, 1),
            ("mlp_hidden_dim", &self.mlp_hidden_dim, 1),
            ("mlp_num_layers", &self.mlp_num_layers, 0),
            ("gnn_p_hidden", &self.gnn_p_hidden, 1),
            ("gnn_p_out", &self.gnn_p_out, 1),
            ("mlp_p_in", &self.mlp_p_in, 1),
            ("mlp_p_hidden", &self.mlp_p_hidden, 1),
        ];
        for (name, values, min) in numeric {
            if let Some(v) = values.iter().find(|&&v| v < min) {
                return Err(Error::Space(format!("`{name}` value {v} is below {min}")));
            }
            if values.iter().collect::<BTreeSet<_>>().len() != values.len() {
                return Err(Error::Space(format!("`{name}` lists a value twice")));
            }
        }
        if self.conv.iter().collect::<BTreeSet<_>>().len() != self.conv.len()
            || self.skip.iter().collect::<BTreeSet<_>>().len() != self.skip.len()
        {
            return Err(Error::Space("`conv`/`skip` list a value twice".into()));
        }
        Ok(())
    }

    /// Number of distinct configurations (saturating).
    pub fn size(&self) -> u64 {
        self.radices().iter().fold(1u64, |acc, &r| acc.saturating_mul(r as u64))
    }

    /// Mixed-radix decoding; the last field varies fastest.
    pub fn config_at(&self, mut index: u64) -> DesignConfig {
        let r = self.radices();
        let mut digits = [0usize; 11];
        for k in (0..11).rev() {
            digits[k] = (index % r[k] as u64) as usize;
            index /= r[k] as u64;
        }
        DesignConfig {
            conv: self.conv[digits[0]],
            gnn_hidden_dim: self.gnn_hidden_dim[digits[1]],
            gnn_out_dim: self.gnn_out_dim[digits[2]],
            gnn_num_layers: self.gnn_num_layers[digits[3]],
            skip: self.skip[digits[4]],
            mlp_hidden_dim: self.mlp_hidden_dim[digits[5]],
            mlp_num_layers: self.mlp_num_layers[digits[6]],
            gnn_p_hidden: self.gnn_p_hidden[digits[7]],
            gnn_p_out: self.gnn_p_out[digits[8]],
            mlp_p_in: self.mlp_p_in[digits[9]],
            mlp_p_hidden: self.mlp_p_hidden[digits[10]],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = DesignConfig> + '_ {
        (0..self.size()).map(move |i| self.config_at(i))
    }

    pub fn contains(&self, c: &DesignConfig) -> bool {
        self.conv.contains(&c.conv)
            && self.gnn_hidden_dim.contains(&c.gnn_hidden_dim)
            && self.gnn_out_dim.contains(&c.gnn_out_dim)
            && self.gnn_num_layers.contains(&c.gnn_num_layers)
            && self.skip.contains(&c.skip)
            && self.mlp_hidden_dim.contains(&c.mlp_hidden_dim)
            && self.mlp_num_layers.contains(&c.mlp_num_layers)
            && self.gnn_p_hidden.contains(&c.gnn_p_hidden)
            && self.gnn_p_out.contains(&c.gnn_p_out)
            && self.mlp_p_in.contains(&c.mlp_p_in)
            && self.mlp_p_hidden.contains(&c.mlp_p_hidden)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DesignConfig {
        fn pick<T: Copy>(v: &[T], rng: &mut ChaCha8Rng) -> T {
            *v.choose(rng).expect("validated non-empty")
        }
        DesignConfig {
            conv: pick(&self.conv, rng),
            gnn_hidden_dim: pick(&self.gnn_hidden_dim, rng),
            gnn_out_dim: pick(&self.gnn_out_dim, rng),
            gnn_num_layers: pick(&self.gnn_num_layers, rng),
            skip: pick(&self.skip, rng),
            mlp_hidden_dim: pick(&self.mlp_hidden_dim, rng),
            mlp_num_layers: pick(&self.mlp_num_layers, rng),
            gnn_p_hidden: pick(&self.gnn_p_hidden, rng),
            gnn_p_out: pick(&self.gnn_p_out, rng),
            mlp_p_in: pick(&self.mlp_p_in, rng),
            mlp_p_hidden: pick(&self.mlp_p_hidden, rng),
        }
    }
}

/// `n` distinct configs, each field drawn uniformly and independently;
/// duplicates are discarded and redrawn. Deterministic per seed.
pub fn sample_design_space(space: &DesignSpace, n: usize, seed: u64) -> Result<Vec<DesignConfig>> {
    space.validate()?;
    if n == 0 {
        return Err(Error::Space("sample size must be at least 1".into()));
    }
    if n as u64 > space.size() {
        return Err(Error::Space(format!(
            "{n} distinct configs requested but the space holds only {}",
            space.size()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = space.draw(&mut rng);
        if seen.insert(c) {
            out.push(c);
        }
    }
    Ok(out)
}

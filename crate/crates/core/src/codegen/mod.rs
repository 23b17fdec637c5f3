//! HLS-style C++ generation: top-level kernel and header, testbench,
//! Makefile and synthesis script, plus the binary data the testbench reads.
//!
//! Generated sources include only the bundled runtime headers
//! (`gnnb_runtime.h`, `gnnb_io.h`); `#pragma HLS` lines are inert under a
//! plain C++17 compiler.

pub mod template;

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, GraphCOO};
use crate::kernels::{model_forward, model_forward_raw};
use crate::model_ir::{validate_project, ActivationKind, ConvKind, NumericMode, ProjectSpec};
use crate::weights::{tensor_inventory, ModelWeights};
use template::{Context, Value};

pub const TEMPLATES_ENV: &str = "GNN_FORGE_TEMPLATES";

/// Default runtime include path, relative to a project's build directory
/// (`build/<name>` under the repository root).
pub const DEFAULT_RUNTIME_INCLUDE: &str = "../../runtime/include";

const BUILTIN_TEMPLATES: &[(&str, &str)] = &[
    ("kernel.cpp.tmpl", include_str!("../../templates/kernel.cpp.tmpl")),
    ("kernel.h.tmpl", include_str!("../../templates/kernel.h.tmpl")),
    ("testbench.cpp.tmpl", include_str!("../../templates/testbench.cpp.tmpl")),
    ("Makefile.tmpl", include_str!("../../templates/Makefile.tmpl")),
    ("synth.tcl.tmpl", include_str!("../../templates/synth.tcl.tmpl")),
];

/// Template source: `$GNN_FORGE_TEMPLATES/<name>` when that variable is set
/// and the file exists, otherwise the copy compiled into the library. A set
/// variable naming a missing directory is an error.
pub fn template_source(name: &str) -> Result<String> {
    if let Some(dir) = std::env::var_os(TEMPLATES_ENV) {
        let dir = Path::new(&dir);
        if !dir.is_dir() {
            return Err(Error::Template(format!(
                "{TEMPLATES_ENV}={} is not a directory",
                dir.display()
            )));
        }
        let path = dir.join(name);
        if path.is_file() {
            return std::fs::read_to_string(&path).map_err(|e| Error::io(path, e));
        }
    }
    BUILTIN_TEMPLATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| src.to_string())
        .ok_or_else(|| Error::Template(format!("no template named `{name}`")))
}

fn render(name: &str, ctx: &Context) -> Result<String> {
    template::render(name, &template_source(name)?, ctx)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmittedFile {
    /// Relative to the project build directory.
    pub path: PathBuf,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CodegenOutput {
    pub files: Vec<EmittedFile>,
}

impl CodegenOutput {
    pub fn get(&self, path: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.path == Path::new(path))
            .map(|f| f.contents.as_str())
    }

    pub fn extend(&mut self, other: CodegenOutput) {
        self.files.extend(other.files);
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for f in &self.files {
            let path = dir.join(&f.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, &f.contents).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodegenOptions {
    pub runtime_include: String,
}

impl Default for CodegenOptions {
    fn default() -> Self {
        Self {
            runtime_include: DEFAULT_RUNTIME_INCLUDE.to_string(),
        }
    }
}

pub fn top_function(proj: &ProjectSpec) -> String {
    format!("{}_top", proj.name)
}

fn ensure_valid(proj: &ProjectSpec) -> Result<()> {
    let violations = validate_project(proj);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(violations.iter().map(|v| v.to_string()).collect()))
    }
}

fn f_type(mode: NumericMode) -> String {
    match mode {
        NumericMode::Float => "double".to_string(),
        NumericMode::Fixed(f) => format!("gnnb::fixed<{}, {}>", f.total_bits(), f.int_bits()),
    }
}

fn act_enum(a: ActivationKind) -> &'static str {
    match a {
        ActivationKind::Relu => "ACT_RELU",
        ActivationKind::Sigmoid => "ACT_SIGMOID",
        ActivationKind::Tanh => "ACT_TANH",
        ActivationKind::Gelu => "ACT_GELU",
        ActivationKind::None => "ACT_NONE",
    }
}

/// C identifier for a tensor name: `gnn.0.lin.weight` -> `gnn_0_lin_weight`.
fn ident(name: &str) -> String {
    name.replace('.', "_")
}

/// Flat `const F_TYPE*` (or `double` for scalars) argument for a tensor.
fn tensor_arg(name: &str, rank: usize) -> String {
    match rank {
        2 => format!("&params.{}[0][0]", ident(name)),
        _ => format!("params.{}", ident(name)),
    }
}

fn common_context(proj: &ProjectSpec, opts: &CodegenOptions) -> Context {
    Context::new()
        .with("name", proj.name.as_str())
        .with("top", top_function(proj))
        .with("runtime_include", opts.runtime_include.as_str())
}

fn output_shape(proj: &ProjectSpec) -> (usize, usize) {
    let m = &proj.model;
    if m.is_graph_level() {
        (m.graph_output_dim(), m.graph_output_dim())
    } else {
        (m.gnn_output_dim, proj.max_nodes * m.gnn_output_dim)
    }
}

fn uses_edge_features(proj: &ProjectSpec) -> bool {
    proj.model.conv == ConvKind::Gin && proj.model.input_edge_dim > 0
}

/// Top-level kernel source and header.
pub fn gen_hw_model(proj: &ProjectSpec, opts: &CodegenOptions) -> Result<CodegenOutput> {
    ensure_valid(proj)?;
    let m = &proj.model;
    let (output_dim, output_size) = output_shape(proj);

    let tensors: Vec<Value> = tensor_inventory(m)
        .into_iter()
        .map(|t| {
            let count: usize = t.shape.iter().product();
            let scalar = t.role == "eps" || t.role == "delta";
            let (ctype, dims, ptr) = if scalar {
                ("double".to_string(), String::new(), format!("&p.{}", ident(&t.name)))
            } else if t.shape.len() == 2 {
                (
                    "F_TYPE".to_string(),
                    format!("[{}][{}]", t.shape[0], t.shape[1]),
                    format!("&p.{}[0][0]", ident(&t.name)),
                )
            } else {
                (
                    "F_TYPE".to_string(),
                    format!("[{count}]"),
                    format!("p.{}", ident(&t.name)),
                )
            };
            Context::new()
                .with("name", t.name.as_str())
                .with("ident", ident(&t.name))
                .with("ctype", ctype)
                .with("dims", dims)
                .with("ptr", ptr)
                .with("count", count)
                .into()
        })
        .collect();

    let buffers = ["emb_a", "emb_b"];
    let layers: Vec<Value> = m
        .gnn_layers()
        .iter()
        .map(|l| {
            let p = |role: &str| format!("gnn.{}.{role}", l.index);
            let w = |role: &str| tensor_arg(&format!("{}.weight", p(role)), 2);
            let b = |role: &str| tensor_arg(&format!("{}.bias", p(role)), 1);
            let (extra_template, args) = match m.conv {
                ConvKind::Gcn => (String::new(), vec![w("lin"), b("lin")]),
                ConvKind::Sage => (String::new(), vec![w("lin_self"), w("lin_neigh"), b("lin_neigh")]),
                ConvKind::Gin => {
                    let (ew, eb) = if l.edge_dim > 0 {
                        (w("edge_lin"), b("edge_lin"))
                    } else {
                        ("nullptr".to_string(), "nullptr".to_string())
                    };
                    (
                        format!(", {}", l.edge_dim),
                        vec![
                            format!("1.0 + params.{}", ident(&p("eps"))),
                            "&edge_features[0][0]".to_string(),
                            ew,
                            eb,
                            w("mlp0"),
                            b("mlp0"),
                            w("mlp1"),
                            b("mlp1"),
                            format!("gnnb::{}", act_enum(m.gnn_activation)),
                        ],
                    )
                }
                ConvKind::Pna => (
                    String::new(),
                    vec![
                        format!("params.{}", ident(&p("delta"))),
                        w("phi"),
                        b("phi"),
                        w("gamma"),
                        b("gamma"),
                    ],
                ),
            };
            Context::new()
                .with("index", l.index)
                .with("in_dim", l.in_dim)
                .with("out_dim", l.out_dim)
                .with("p_in", l.p_in)
                .with("p_out", l.p_out)
                .with("src", buffers[l.index % 2])
                .with("dst", buffers[(l.index + 1) % 2])
                .with("skip", l.skip_applies(m))
                .with("extra_template", extra_template)
                .with("args", args)
                .into()
        })
        .collect();
    let final_emb = buffers[m.gnn_num_layers % 2];

    let mut pooled_dim = 0;
    let pools: Vec<Value> = m
        .pooling
        .iter()
        .map(|k| {
            let offset = pooled_dim;
            pooled_dim += m.gnn_output_dim;
            Context::new().with("kind", k.name()).with("offset", offset).into()
        })
        .collect();

    let mlp_plans = m.mlp_layers();
    let n_mlp = mlp_plans.len();
    let buf_name = |k: usize| format!("mlp_buf_{k}");
    let mlp_buffers: Vec<Value> = mlp_plans
        .iter()
        .take(n_mlp.saturating_sub(1))
        .enumerate()
        .map(|(k, l)| Context::new().with("ident", buf_name(k)).with("dim", l.out_dim).into())
        .collect();
    let mlp: Vec<Value> = mlp_plans
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let src = if k == 0 { "pooled".to_string() } else { buf_name(k - 1) };
            let dst = if k + 1 == n_mlp {
                "output".to_string()
            } else {
                buf_name(k)
            };
            Context::new()
                .with("in_dim", l.in_dim)
                .with("out_dim", l.out_dim)
                .with("p_in", l.p_in)
                .with("p_out", l.p_out)
                .with("src", src)
                .with("dst", dst)
                .with("weight", tensor_arg(&format!("mlp.{k}.weight"), 2))
                .with("bias", tensor_arg(&format!("mlp.{k}.bias"), 1))
                .into()
        })
        .collect();

    let ctx = common_context(proj, opts)
        .with("max_nodes", proj.max_nodes)
        .with("max_edges", proj.max_edges)
        .with("node_dim", m.input_node_dim)
        .with("edge_dim", m.input_edge_dim)
        .with("edge_dim_alloc", m.input_edge_dim.max(1))
        .with("emb_max_dim", m.max_embedding_dim())
        .with("output_dim", output_dim)
        .with("output_size", output_size)
        .with("graph_level", m.is_graph_level())
        .with("f_type", f_type(proj.numeric_mode))
        .with("tensors", Value::List(tensors))
        .with(
            "emb_partition",
            m.parallelism.gnn_p_hidden.clamp(1, m.max_embedding_dim()),
        )
        .with("uses_edge_features", uses_edge_features(proj))
        .with("conv", m.conv.name())
        .with("gnn_act", act_enum(m.gnn_activation))
        .with("layers", Value::List(layers))
        .with("final_emb", final_emb)
        .with("pools", Value::List(pools))
        .with("pooled_dim", pooled_dim)
        .with("gnn_out_dim", m.gnn_output_dim)
        .with("pool_partition", m.parallelism.gnn_p_out.clamp(1, m.gnn_output_dim))
        .with("has_mlp", m.mlp.is_some())
        .with("pool_target", if m.mlp.is_some() { "pooled" } else { "output" })
        .with("mlp_buffers", Value::List(mlp_buffers))
        .with("mlp", Value::List(mlp))
        .with(
            "mlp_act",
            act_enum(m.mlp.as_ref().map_or(ActivationKind::None, |x| x.activation)),
        )
        .with("output_act", act_enum(m.output_activation));

    Ok(CodegenOutput {
        files: vec![
            EmittedFile {
                path: format!("{}_kernel.h", proj.name).into(),
                contents: render("kernel.h.tmpl", &ctx)?,
            },
            EmittedFile {
                path: format!("{}_kernel.cpp", proj.name).into(),
                contents: render("kernel.cpp.tmpl", &ctx)?,
            },
        ],
    })
}

fn check_dataset(proj: &ProjectSpec, dataset: &[GraphCOO]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Codegen("testbench needs at least one graph".into()));
    }
    for (i, g) in dataset.iter().enumerate() {
        g.check_bounds(proj.max_nodes, proj.max_edges)
            .map_err(|e| Error::Codegen(format!("dataset graph {i}: {e}")))?;
    }
    Ok(())
}

/// Testbench source. `golden` holds one float-mode reference output per graph.
pub fn gen_testbench(
    proj: &ProjectSpec,
    dataset: &[GraphCOO],
    golden: &[Vec<f64>],
    opts: &CodegenOptions,
) -> Result<CodegenOutput> {
    ensure_valid(proj)?;
    check_dataset(proj, dataset)?;
    if golden.len() != dataset.len() {
        return Err(Error::Codegen(format!(
            "{} golden outputs for {} graphs",
            golden.len(),
            dataset.len()
        )));
    }
    let ctx = common_context(proj, opts)
        .with("num_graphs", dataset.len())
        .with("fixed", matches!(proj.numeric_mode, NumericMode::Fixed(_)))
        .with("f_type", f_type(proj.numeric_mode))
        .with("graph_level", proj.model.is_graph_level())
        .with("uses_edge_features", uses_edge_features(proj));
    Ok(CodegenOutput {
        files: vec![EmittedFile {
            path: format!("{}_tb.cpp", proj.name).into(),
            contents: render("testbench.cpp.tmpl", &ctx)?,
        }],
    })
}

pub fn gen_makefile(proj: &ProjectSpec, opts: &CodegenOptions) -> Result<String> {
    render("Makefile.tmpl", &common_context(proj, opts))
}

/// Clock period in ns with two decimals (300 MHz -> "3.33").
pub fn clock_period_ns(clock_mhz: f64) -> String {
    format!("{:.2}", 1000.0 / clock_mhz)
}

pub fn gen_synth_script(proj: &ProjectSpec, opts: &CodegenOptions) -> Result<String> {
    let ctx = common_context(proj, opts)
        .with("fpga_part", proj.fpga_part.as_str())
        .with("clock_period_ns", clock_period_ns(proj.clock_mhz));
    render("synth.tcl.tmpl", &ctx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TbDataManifest {
    format: String,
    version: u32,
    num_graphs: usize,
    numeric_mode: NumericMode,
    graph_level: bool,
    output_dim: usize,
    has_labels: bool,
    has_expected_raw: bool,
}

fn le_bytes<T: Copy, const N: usize>(xs: &[T], f: impl Fn(T) -> [u8; N]) -> Vec<u8> {
    xs.iter().flat_map(|&x| f(x)).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Float-mode simulator outputs, one flattened vector per graph.
pub fn golden_outputs(proj: &ProjectSpec, dataset: &[GraphCOO], weights: &ModelWeights) -> Result<Vec<Vec<f64>>> {
    dataset
        .iter()
        .map(|g| Ok(model_forward(proj, g, weights, NumericMode::Float)?.values().to_vec()))
        .collect()
}

/// Writes `tb_data/` under `dir`: graphs, weights, float golden outputs,
/// fixed-mode raw simulator outputs (fixed projects) and labels (if any).
pub fn export_testbench_data(
    proj: &ProjectSpec,
    dataset: &Dataset,
    weights: &ModelWeights,
    golden: &[Vec<f64>],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    check_dataset(proj, &dataset.graphs)?;
    let root = dir.join("tb_data");
    let mut written = Dataset {
        graphs: dataset.graphs.clone(),
        targets: dataset.targets.clone(),
    }
    .save(&root.join("graphs"))?;
    weights.save(&proj.model, &root.join("weights"))?;
    written.push(root.join("weights"));

    for (i, out) in golden.iter().enumerate() {
        let path = root.join("golden").join(format!("graph_{i:04}.bin"));
        write_file(&path, &le_bytes(out, f64::to_le_bytes))?;
        written.push(path);
    }
    let fixed = matches!(proj.numeric_mode, NumericMode::Fixed(_));
    if fixed {
        for (i, g) in dataset.graphs.iter().enumerate() {
            let raw = model_forward_raw(proj, g, weights)?;
            let path = root.join("expected_raw").join(format!("graph_{i:04}.bin"));
            write_file(&path, &le_bytes(raw.values(), i64::to_le_bytes))?;
            written.push(path);
        }
    }
    let has_labels = dataset.targets.iter().any(Option::is_some);
    if has_labels {
        for (i, t) in dataset.targets.iter().enumerate() {
            let labels: Vec<f64> = t.clone().unwrap_or_default();
            let path = root.join("labels").join(format!("graph_{i:04}.bin"));
            write_file(&path, &le_bytes(&labels, f64::to_le_bytes))?;
            written.push(path);
        }
    }
    let manifest = TbDataManifest {
        format: "gnnb-tb-data".into(),
        version: 1,
        num_graphs: dataset.graphs.len(),
        numeric_mode: proj.numeric_mode,
        graph_level: proj.model.is_graph_level(),
        output_dim: output_shape(proj).0,
        has_labels,
        has_expected_raw: fixed,
    };
    let path = root.join("manifest.json");
    write_file(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Every source file for a project: kernel, header, testbench, Makefile,
/// synthesis script.
pub fn gen_all(
    proj: &ProjectSpec,
    dataset: &[GraphCOO],
    golden: &[Vec<f64>],
    opts: &CodegenOptions,
) -> Result<CodegenOutput> {
    let mut out = gen_hw_model(proj, opts)?;
    out.extend(gen_testbench(proj, dataset, golden, opts)?);
    out.files.push(EmittedFile {
        path: "Makefile".into(),
        contents: gen_makefile(proj, opts)?,
    });
    out.files.push(EmittedFile {
        path: "synth.tcl".into(),
        contents: gen_synth_script(proj, opts)?,
    });
    Ok(out)
}

/// Generate sources and testbench data into `dir`.
pub fn generate_project(
    proj: &ProjectSpec,
    dataset: &Dataset,
    weights: &ModelWeights,
    opts: &CodegenOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    check_dataset(proj, &dataset.graphs)?;
    let golden = golden_outputs(proj, &dataset.graphs, weights)?;
    let mut written = gen_all(proj, &dataset.graphs, &golden, opts)?.write_to(dir)?;
    written.extend(export_testbench_data(proj, dataset, weights, &golden, dir)?);
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestbenchReport {
    pub mae: f64,
    /// Mean kernel wall time per graph, seconds.
    pub avg_runtime: f64,
}

fn read_metric(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::MissingMetric(path.to_path_buf()))?;
    text.trim()
        .parse()
        .map_err(|_| Error::Build(format!("{}: not a number: {:?}", path.display(), text.trim())))
}

/// `make -C dir run`, then parse `tb_results/{mae,runtime}.txt`.
pub fn build_and_run_testbench(dir: &Path) -> Result<TestbenchReport> {
    let make = std::env::var("MAKE").unwrap_or_else(|_| "make".to_string());
    let output = Command::new(&make)
        .arg("-C")
        .arg(dir)
        .arg("run")
        .output()
        .map_err(|e| Error::Build(format!("could not run `{make}`: {e}")))?;
    if !output.status.success() {
        return Err(Error::Build(format!(
            "`{make} -C {} run` exited with {}\n{}{}",
            dir.display(),
            output.status,
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        )));
    }
    let results = dir.join("tb_results");
    Ok(TestbenchReport {
        mae: read_metric(&results.join("mae.txt"))?,
        avg_runtime: read_metric(&results.join("runtime.txt"))?,
    })
}

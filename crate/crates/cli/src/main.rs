//! `gnn-forge`: validate specs, simulate, generate HLS projects, estimate and
//! explore designs. Results go to stdout as JSON, progress to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use gnn_forge::cases::{generate_cases, write_cases};
use gnn_forge::codegen::{build_and_run_testbench, generate_project, CodegenOptions};
use gnn_forge::dse::{run_dse, Predictor, Strategy};
use gnn_forge::graph::{compute_dataset_stats, generate_graph, Dataset, RandomGraphSpec};
use gnn_forge::kernels::model::{model_forward, model_forward_raw};
use gnn_forge::model_ir::{
    load_project_spec, parse_model_spec, validate_model_spec, validate_project, NumericMode, ProjectSpec,
};
use gnn_forge::perf::{
    build_surrogate_database, cross_validate, estimate_project, sample_design_space, surrogate_estimate, DesignConfig,
    DesignContext, DesignDatabase, DesignSpace, PerfModels, Target, TargetScale,
};
use gnn_forge::weights::ModelWeights;

#[derive(Parser)]
#[command(name = "gnn-forge", version, about = "GNN accelerator compiler toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a project (or, with --model, a bare model) spec.
    Validate {
        spec: PathBuf,
        /// Treat the file as a model spec rather than a project spec.
        #[arg(long)]
        model: bool,
    },
    /// Run the float and fixed simulators over a dataset.
    Simulate {
        project: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        /// Write per-graph outputs here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit kernel, header, testbench, Makefile, synthesis script and testbench data.
    Gen {
        project: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// `gen`, then build and run the C++ testbench.
    Testbench {
        project: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Latency/BRAM estimate for a project or a design config.
    Estimate {
        /// Project spec to estimate with the analytic model.
        project: Option<PathBuf>,
        /// Design config JSON (instead of a project).
        #[arg(long, conflicts_with = "project")]
        config: Option<PathBuf>,
        #[arg(long)]
        context: Option<PathBuf>,
        /// Predict with fitted models instead of the analytic surrogate.
        #[arg(long, requires = "config")]
        models: Option<PathBuf>,
    },
    /// Build (or load) a design database, cross-validate and fit the forests.
    Fit {
        /// Existing JSONL database; otherwise one is sampled and labelled.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        context: Option<PathBuf>,
        /// Save the sampled database here.
        #[arg(long)]
        db_out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value = "log")]
        target_scale: TargetScale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum-latency design under a BRAM budget.
    Dse {
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        budget_bram: u64,
        #[arg(long, default_value = "surrogate", value_parser = ["forest", "surrogate"])]
        predictor: String,
        /// Fitted models, required by the forest predictor.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        context: Option<PathBuf>,
        /// `exhaustive` or `sample:N`.
        #[arg(long, default_value = "exhaustive")]
        strategy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic graphs sized to the project's guesses, plus random weights.
    MakeDataset {
        project: PathBuf,
        #[arg(long, default_value_t = 20)]
        graphs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; gets `graphs/` and `weights/`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed-point conformance vectors for the C++ runtime.
    Cases {
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Inputs {
    /// Dataset directory (`manifest.json` + `.gnnb-graph` files).
    #[arg(long)]
    dataset: PathBuf,
    /// Weights directory.
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory; defaults to the project's build_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include path for the runtime headers, as written into the Makefile.
    #[arg(long)]
    runtime_include: Option<String>,
}

/// Input problems the user can fix (bad specs, graphs, spaces) exit 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    use gnn_forge::Error as E;
    let user = err.chain().any(|c| {
        matches!(
            c.downcast_ref::<E>(),
            Some(
                E::Parse { .. }
                    | E::Format(_)
                    | E::NaN
                    | E::FormatMismatch { .. }
                    | E::Shape(_)
                    | E::Graph(_)
                    | E::GraphFile(_)
                    | E::Weights(_)
                    | E::InvalidSpec(_)
                    | E::Infeasible(_)
                    | E::Space(_)
                    | E::Model(_)
            )
        ) || c.downcast_ref::<Invalid>().is_some()
    });
    if user {
        1
    } else {
        2
    }
}

#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (e.g. `| head`) is not a failure of the command
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| Invalid(format!("{what} {}: {e}", path.display())))
        .map_err(Into::into)
}

fn load_project(path: &Path) -> Result<ProjectSpec> {
    let proj = load_project_spec(path)?;
    let v = validate_project(&proj);
    if !v.is_empty() {
        return Err(gnn_forge::Error::InvalidSpec(v.iter().map(ToString::to_string).collect()).into());
    }
    Ok(proj)
}

fn load_context(path: Option<&Path>) -> Result<DesignContext> {
    path.map_or_else(|| Ok(DesignContext::default()), |p| read_json(p, "design context"))
}

fn load_space(path: Option<&Path>) -> Result<DesignSpace> {
    match path {
        Some(p) => Ok(DesignSpace::load(p)?),
        None => Ok(DesignSpace::benchmark()),
    }
}

fn load_inputs(inputs: &Inputs) -> Result<(Dataset, ModelWeights)> {
    let ds = Dataset::load(&inputs.dataset)?;
    let w = ModelWeights::load(&inputs.weights)?;
    Ok((ds, w))
}

fn codegen_options(g: &GenArgs) -> CodegenOptions {
    let mut opts = CodegenOptions::default();
    if let Some(inc) = &g.runtime_include {
        opts.runtime_include = inc.clone();
    }
    opts
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { spec, model } => {
            let violations = if model {
                let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
                validate_model_spec(&parse_model_spec(&text)?)
            } else {
                validate_project(&load_project_spec(&spec)?)
            };
            print_json(&json!({ "valid": violations.is_empty(), "violations": violations }))?;
            if !violations.is_empty() {
                bail!(Invalid(format!("{} violation(s)", violations.len())));
            }
        }
        Command::Simulate { project, inputs, out } => {
            let proj = load_project(&project)?;
            let (ds, w) = load_inputs(&inputs)?;
            eprintln!("simulating {} graphs", ds.graphs.len());
            let mut per_graph = Vec::with_capacity(ds.graphs.len());
            let (mut abs_sum, mut count) = (0.0, 0usize);
            for g in &ds.graphs {
                let float = model_forward(&proj, g, &w, NumericMode::Float)?.values().to_vec();
                let fixed = match proj.numeric_mode {
                    NumericMode::Float => None,
                    mode => Some((
                        model_forward(&proj, g, &w, mode)?.values().to_vec(),
                        model_forward_raw(&proj, g, &w)?.values().to_vec(),
                    )),
                };
                if let Some((f, _)) = &fixed {
                    abs_sum += float.iter().zip(f).map(|(a, b)| (a - b).abs()).sum::<f64>();
                    count += float.len();
                }
                per_graph.push(json!({
                    "float": float,
                    "fixed": fixed.as_ref().map(|f| &f.0),
                    "fixed_raw": fixed.as_ref().map(|f| &f.1),
                }));
            }
            let mae = (count > 0).then(|| abs_sum / count as f64);
            if let Some(path) = out {
                write_json(&path, &per_graph)?;
            }
            print_json(&json!({
                "num_graphs": ds.graphs.len(),
                "numeric_mode": proj.numeric_mode,
                "mae_float_vs_fixed": mae,
            }))?;
        }
        Command::Gen { project, inputs, gen } => {
            let proj = load_project(&project)?;
            let (ds, w) = load_inputs(&inputs)?;
            let dir = gen.out.clone().unwrap_or_else(|| proj.build_dir());
            let files = generate_project(&proj, &ds, &w, &codegen_options(&gen), &dir)?;
            eprintln!("wrote {} files under {}", files.len(), dir.display());
            print_json(&json!({ "dir": dir, "files": files }))?;
        }
        Command::Testbench { project, inputs, gen } => {
            let proj = load_project(&project)?;
            let (ds, w) = load_inputs(&inputs)?;
            let dir = gen.out.clone().unwrap_or_else(|| proj.build_dir());
            generate_project(&proj, &ds, &w, &codegen_options(&gen), &dir)?;
            eprintln!("building testbench in {}", dir.display());
            print_json(&build_and_run_testbench(&dir)?)?;
        }
        Command::Estimate {
            project,
            config,
            context,
            models,
        } => match (project, config) {
            (Some(p), None) => print_json(&estimate_project(&load_project(&p)?))?,
            (None, Some(c)) => {
                let cfg: DesignConfig = read_json(&c, "design config")?;
                let est = match models {
                    Some(m) => PerfModels::load(&m)?.predict(&cfg),
                    None => surrogate_estimate(&cfg, &load_context(context.as_deref())?),
                };
                print_json(&est)?;
            }
            _ => bail!(Invalid("give a project path or --config".into())),
        },
        Command::Fit {
            db,
            samples,
            space,
            context,
            db_out,
            folds,
            target_scale,
            seed,
            out,
        } => {
            let ctx = load_context(context.as_deref())?;
            let db = match db {
                Some(p) => DesignDatabase::load(&p)?,
                None => {
                    let cfgs = sample_design_space(&load_space(space.as_deref())?, samples, seed)?;
                    build_surrogate_database(&cfgs, &ctx)?
                }
            };
            if let Some(p) = db_out {
                db.save(&p)?;
            }
            eprintln!("cross-validating on {} designs", db.len());
            let cv: Vec<_> = Target::BOTH
                .iter()
                .map(|&t| cross_validate(&db, t, target_scale, folds, seed))
                .collect::<gnn_forge::Result<_>>()?;
            let models = PerfModels::fit(&db, &ctx, target_scale, seed)?;
            models.save(&out)?;
            print_json(&json!({
                "designs": db.len(),
                "provenance": models.provenance,
                "models": out,
                "cv": cv,
            }))?;
        }
        Command::Dse {
            space,
            budget_bram,
            predictor,
            models,
            context,
            strategy,
            seed,
            out,
        } => {
            let space = load_space(space.as_deref())?;
            let strategy = Strategy::parse(&strategy, seed)?;
            let loaded;
            let ctx;
            let predictor = if predictor == "forest" {
                let Some(m) = models else {
                    bail!(Invalid("--predictor forest needs --models".into()));
                };
                loaded = PerfModels::load(&m)?;
                Predictor::Forest(&loaded)
            } else {
                ctx = load_context(context.as_deref())?;
                Predictor::Surrogate(&ctx)
            };
            let r = run_dse(&space, budget_bram, &predictor, strategy)?;
            if r.best.is_none() {
                eprintln!("no evaluated design fits within {budget_bram} BRAM18K");
            }
            if let Some(p) = out {
                write_json(&p, &r)?;
            }
            print_json(&r)?;
        }
        Command::MakeDataset {
            project,
            graphs,
            seed,
            out,
        } => {
            let proj = load_project(&project)?;
            if graphs == 0 {
                bail!(Invalid("--graphs must be at least 1".into()));
            }
            let ds = synthetic_dataset(&proj, graphs, seed)?;
            let stats = compute_dataset_stats(&ds.graphs)?;
            // PNA's delta is the dataset's mean log-degree; guard degenerate graphs
            let delta = if stats.avg_log_degree > 0.0 {
                stats.avg_log_degree
            } else {
                1.0
            };
            let w = ModelWeights::random(&proj.model, seed, delta);
            ds.save(&out.join("graphs"))?;
            w.save(&proj.model, &out.join("weights"))?;
            print_json(&json!({
                "dataset": out.join("graphs"),
                "weights": out.join("weights"),
                "stats": stats,
            }))?;
        }
        Command::Cases { count, seed, out } => {
            write_cases(&out, &generate_cases(count, seed))?;
            print_json(&json!({ "cases": count, "file": out }))?;
        }
    }
    Ok(())
}

/// Graphs whose node/edge counts scatter around the project's guesses,
/// clipped to its buffer bounds.
fn synthetic_dataset(proj: &ProjectSpec, count: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi_nodes = ((proj.num_nodes_guess * 1.5).ceil() as usize).clamp(1, proj.max_nodes);
    let lo_nodes = ((proj.num_nodes_guess * 0.5).floor() as usize).clamp(1, hi_nodes);
    let mut graphs = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.gen_range(lo_nodes..=hi_nodes);
        let cap = (n * (n - 1)).min(proj.max_edges);
        let target = (proj.num_edges_guess * n as f64 / proj.num_nodes_guess.max(1.0)).round() as usize;
        let m = rng.gen_range(target / 2..=target + target / 2).min(cap);
        graphs.push(generate_graph(&RandomGraphSpec {
            nodes: n,
            edges: m,
            node_dim: proj.model.input_node_dim,
            edge_dim: proj.model.input_edge_dim,
            self_loops: false,
            seed: rng.gen(),
        })?);
    }
    let targets = vec![None; count];
    Ok(Dataset { graphs, targets })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

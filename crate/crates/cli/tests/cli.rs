use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnn-forge"))
        .args(args)
        .output()
        .unwrap()
}

fn json(o: &Output) -> Value {
    assert!(
        o.status.success(),
        "exit {:?}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_dataset(dir: &Path, project: &str) -> (PathBuf, PathBuf) {
    let spec = repo(project);
    let out = dir.join("data");
    json(&forge(&[
        "make-dataset",
        s(&spec),
        "--graphs",
        "4",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]));
    (out.join("graphs"), out.join("weights"))
}

#[test]
fn validate_accepts_reference_spec_and_rejects_bad_specs() {
    let o = forge(&["validate", s(&repo("specs/hiv_sage.json"))]);
    assert_eq!(json(&o)["valid"], true);

    let dir = tempfile::tempdir().unwrap();
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(repo("specs/hiv_sage.json")).unwrap()).unwrap();
    spec["model"]["mlp"]["in_dim"] = 3.into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, spec.to_string()).unwrap();
    let o = forge(&["validate", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["violations"][0]["field"].as_str().unwrap().contains("mlp"));

    std::fs::write(&bad, "{\"name\": 1}").unwrap();
    assert_eq!(forge(&["validate", s(&bad)]).status.code(), Some(1));
    // unreadable input is an environment failure, not a spec violation
    assert_eq!(forge(&["validate", "/nonexistent/spec.json"]).status.code(), Some(2));
}

#[test]
fn model_only_validation() {
    let dir = tempfile::tempdir().unwrap();
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(repo("specs/hiv_sage.json")).unwrap()).unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, spec["model"].to_string()).unwrap();
    assert_eq!(json(&forge(&["validate", "--model", s(&path)]))["valid"], true);
}

#[test]
fn dataset_simulate_and_gen() {
    let dir = tempfile::tempdir().unwrap();
    let (graphs, weights) = make_dataset(dir.path(), "specs/hiv_sage.json");
    let outputs = dir.path().join("outputs.json");
    let v = json(&forge(&[
        "simulate",
        s(&repo("specs/hiv_sage.json")),
        "--dataset",
        s(&graphs),
        "--weights",
        s(&weights),
        "--out",
        s(&outputs),
    ]));
    assert_eq!(v["num_graphs"], 4);
    let mae = v["mae_float_vs_fixed"].as_f64().unwrap();
    assert!(mae > 0.0 && mae < 0.25, "{mae}");
    let per: Value = serde_json::from_str(&std::fs::read_to_string(&outputs).unwrap()).unwrap();
    assert_eq!(per.as_array().unwrap().len(), 4);
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(repo("specs/hiv_sage.json")).unwrap()).unwrap();
    assert_eq!(
        per[0]["float"].as_array().unwrap().len() as u64,
        spec["model"]["mlp"]["out_dim"].as_u64().unwrap()
    );

    let gen = dir.path().join("gen");
    let v = json(&forge(&[
        "gen",
        s(&repo("specs/hiv_sage.json")),
        "--dataset",
        s(&graphs),
        "--weights",
        s(&weights),
        "--out",
        s(&gen),
    ]));
    assert!(!v["files"].as_array().unwrap().is_empty());
    for f in [
        "hiv_sage_kernel.h",
        "hiv_sage_kernel.cpp",
        "hiv_sage_tb.cpp",
        "Makefile",
        "synth.tcl",
    ] {
        assert!(gen.join(f).is_file(), "{f}");
    }
    assert!(gen.join("tb_data/manifest.json").is_file());
}

#[test]
fn gen_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (graphs, weights) = make_dataset(dir.path(), "specs/hiv_sage.json");
    let run = |out: &Path| {
        json(&forge(&[
            "gen",
            s(&repo("specs/hiv_sage.json")),
            "--dataset",
            s(&graphs),
            "--weights",
            s(&weights),
            "--out",
            s(out),
        ]))
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    for f in ["hiv_sage_kernel.cpp", "hiv_sage_tb.cpp", "Makefile", "synth.tcl"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn template_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let (graphs, weights) = make_dataset(dir.path(), "specs/hiv_sage.json");
    let tmpl = dir.path().join("templates");
    std::fs::create_dir(&tmpl).unwrap();
    std::fs::write(tmpl.join("synth.tcl.tmpl"), "# custom flow for {{ top }}\n").unwrap();
    let out = dir.path().join("gen");
    let o = Command::new(env!("CARGO_BIN_EXE_gnn-forge"))
        .env("GNN_FORGE_TEMPLATES", &tmpl)
        .args([
            "gen",
            s(&repo("specs/hiv_sage.json")),
            "--dataset",
            s(&graphs),
            "--weights",
            s(&weights),
            "--out",
            s(&out),
        ])
        .output()
        .unwrap();
    json(&o);
    assert_eq!(
        std::fs::read_to_string(out.join("synth.tcl")).unwrap(),
        "# custom flow for hiv_sage_top\n"
    );
    // files without an override still come from the built-in set
    assert!(std::fs::read_to_string(out.join("Makefile"))
        .unwrap()
        .contains("tb_results"));
}

#[test]
fn testbench_reports_metrics_from_make() {
    let dir = tempfile::tempdir().unwrap();
    let (graphs, weights) = make_dataset(dir.path(), "specs/hiv_sage.json");
    let fake_make = dir.path().join("fake-make.sh");
    std::fs::write(
        &fake_make,
        "#!/bin/sh\n# invoked as: fake-make -C <dir> run\nmkdir -p \"$2/tb_results\"\necho 0.0125 > \"$2/tb_results/mae.txt\"\necho 0.002 > \"$2/tb_results/runtime.txt\"\n",
    )
    .unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&fake_make, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    let o = Command::new(env!("CARGO_BIN_EXE_gnn-forge"))
        .env("MAKE", &fake_make)
        .args([
            "testbench",
            s(&repo("specs/hiv_sage.json")),
            "--dataset",
            s(&graphs),
            "--weights",
            s(&weights),
            "--out",
            s(&dir.path().join("tb")),
        ])
        .output()
        .unwrap();
    let v = json(&o);
    assert_eq!(v["mae"].as_f64(), Some(0.0125));
    assert_eq!(v["avg_runtime"].as_f64(), Some(0.002));

    let failing = Command::new(env!("CARGO_BIN_EXE_gnn-forge"))
        .env("MAKE", "false")
        .args([
            "testbench",
            s(&repo("specs/hiv_sage.json")),
            "--dataset",
            s(&graphs),
            "--weights",
            s(&weights),
            "--out",
            s(&dir.path().join("tb2")),
        ])
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(2));
}

#[test]
fn estimate_project_and_config() {
    let v = json(&forge(&["estimate", s(&repo("specs/bench_gin.json"))]));
    assert_eq!(v["latency_cycles"], 60_606);
    assert!(v["bram_18k"].as_u64().unwrap() > 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"conv":"gcn","gnn_hidden_dim":64,"gnn_out_dim":64,"gnn_num_layers":2,"skip":false,
            "mlp_hidden_dim":64,"mlp_num_layers":1,"gnn_p_hidden":2,"gnn_p_out":2,"mlp_p_in":2,"mlp_p_hidden":2}"#,
    )
    .unwrap();
    let v = json(&forge(&["estimate", "--config", s(&cfg)]));
    let cycles = v["latency_cycles"].as_f64().unwrap();
    assert!((v["latency_ms"].as_f64().unwrap() - cycles / 300e3).abs() < 1e-12);

    std::fs::write(&cfg, r#"{"conv":"gcn","bogus":1}"#).unwrap();
    assert_eq!(forge(&["estimate", "--config", s(&cfg)]).status.code(), Some(1));
}

#[test]
fn fit_then_forest_dse() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models.json");
    let db = dir.path().join("db.jsonl");
    let v = json(&forge(&[
        "fit",
        "--samples",
        "60",
        "--seed",
        "5",
        "--db-out",
        s(&db),
        "--out",
        s(&models),
    ]));
    assert_eq!(v["designs"], 60);
    assert_eq!(v["cv"].as_array().unwrap().len(), 2);
    assert_eq!(std::fs::read_to_string(&db).unwrap().lines().count(), 60);

    // refit from the saved database gives the same models
    let models2 = dir.path().join("models2.json");
    json(&forge(&["fit", "--db", s(&db), "--seed", "5", "--out", s(&models2)]));
    assert_eq!(std::fs::read(&models).unwrap(), std::fs::read(&models2).unwrap());

    let out = dir.path().join("dse.json");
    let v = json(&forge(&[
        "dse",
        "--space",
        s(&repo("specs/space_small.json")),
        "--budget-bram",
        "1500",
        "--predictor",
        "forest",
        "--models",
        s(&models),
        "--out",
        s(&out),
    ]));
    assert_eq!(v["predictor"], "forest");
    assert_eq!(v["evaluated"], 144);
    assert!(out.is_file());

    let o = forge(&["dse", "--budget-bram", "10", "--predictor", "forest"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dse_sampling_and_infeasible_budget() {
    let v = json(&forge(&[
        "dse",
        "--budget-bram",
        "100000",
        "--strategy",
        "sample:50",
        "--seed",
        "2",
    ]));
    assert_eq!(v["evaluated"], 50);
    let w = json(&forge(&[
        "dse",
        "--budget-bram",
        "100000",
        "--strategy",
        "sample:50",
        "--seed",
        "2",
    ]));
    assert_eq!(v["best"], w["best"]);

    let v = json(&forge(&[
        "dse",
        "--space",
        s(&repo("specs/space_small.json")),
        "--budget-bram",
        "0",
    ]));
    assert!(v["best"].is_null());
    assert_eq!(
        forge(&["dse", "--budget-bram", "1", "--strategy", "grid"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn cases_file_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fx.gnnb-cases");
    json(&forge(&["cases", "--count", "10000", "--seed", "1", "--out", s(&path)]));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"GNBC");
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 10_000);
    assert_eq!(bytes.len(), 16 + 28 * 10_000);
    assert_eq!(gnn_forge::cases::read_cases(&path).unwrap().len(), 10_000);
}

/// Top-level keys of a command's output must be exactly the schema's properties.
fn assert_schema_keys(schema: &str, v: &Value) {
    let s: Value = serde_json::from_str(&std::fs::read_to_string(repo("docs/schemas").join(schema)).unwrap()).unwrap();
    let mut want: Vec<&str> = s["properties"]
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    let mut got: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    want.sort_unstable();
    got.sort_unstable();
    assert_eq!(got, want, "{schema}");
}

#[test]
fn outputs_match_published_schema_keys() {
    let dir = tempfile::tempdir().unwrap();
    assert_schema_keys(
        "validate-output.schema.json",
        &json(&forge(&["validate", s(&repo("specs/hiv_sage.json"))])),
    );
    assert_schema_keys(
        "estimate-output.schema.json",
        &json(&forge(&["estimate", s(&repo("specs/bench_gin.json"))])),
    );
    let dse = json(&forge(&[
        "dse",
        "--space",
        s(&repo("specs/space_small.json")),
        "--budget-bram",
        "2000",
    ]));
    assert_schema_keys("dse-output.schema.json", &dse);
    let out = dir.path().join("c.gnnb-cases");
    assert_schema_keys(
        "cases-output.schema.json",
        &json(&forge(&["cases", "--count", "3", "--out", s(&out)])),
    );
    let data = dir.path().join("data");
    let made = json(&forge(&[
        "make-dataset",
        s(&repo("specs/hiv_sage.json")),
        "--graphs",
        "2",
        "--out",
        s(&data),
    ]));
    assert_schema_keys("make-dataset-output.schema.json", &made);
    let graphs = data.join("graphs");
    let weights = data.join("weights");
    let sim = json(&forge(&[
        "simulate",
        s(&repo("specs/hiv_sage.json")),
        "--dataset",
        s(&graphs),
        "--weights",
        s(&weights),
    ]));
    assert_schema_keys("simulate-output.schema.json", &sim);
    let models = dir.path().join("m.json");
    let fit = json(&forge(&["fit", "--samples", "30", "--folds", "3", "--out", s(&models)]));
    assert_schema_keys("fit-output.schema.json", &fit);
}

#[test]
fn checked_in_models_load_and_drive_dse() {
    let models = repo("models/perf_models.json");
    let v = json(&forge(&[
        "dse",
        "--space",
        s(&repo("specs/space_small.json")),
        "--budget-bram",
        "2000",
        "--predictor",
        "forest",
        "--models",
        s(&models),
    ]));
    assert_eq!(v["evaluated"], 144);
    assert!(v["best"]["estimate"]["bram_18k"].as_u64().unwrap() <= 2000);
}

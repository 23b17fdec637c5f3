mod common;

use common::{oracle_forward, project, random_case, rel_err, REL_TOL};
use gnn_forge::fixed_point::FixedPointFormat;
use gnn_forge::graph::GraphCOO;
use gnn_forge::kernels::{model_forward, model_forward_raw, FloatArith, ModelOutput, Simulator};
use gnn_forge::model_ir::{ConvKind, NumericMode};

fn float_values(out: &ModelOutput<f64>) -> Vec<f64> {
    out.values().to_vec()
}

#[test]
fn node_level_matches_oracle_for_every_conv() {
    for kind in ConvKind::ALL {
        for seed in 0..25 {
            let (spec, g, w) = random_case(kind, 1000 + seed, false);
            let got = Simulator::new(FloatArith, &spec, &w).unwrap().forward(&g).unwrap();
            let want = oracle_forward(&spec, &g, &w);
            let err = rel_err(got.values(), &want);
            assert!(err <= REL_TOL, "{kind:?} seed {seed}: rel err {err}");
        }
    }
}

#[test]
fn graph_level_matches_oracle_for_every_conv() {
    for kind in ConvKind::ALL {
        for seed in 0..25 {
            let (spec, g, w) = random_case(kind, 5000 + seed, true);
            let proj = project("oracle", spec.clone(), NumericMode::Float);
            let got = model_forward(&proj, &g, &w, NumericMode::Float).unwrap();
            assert!(matches!(got, ModelOutput::Graph(_)));
            let want = oracle_forward(&spec, &g, &w);
            let err = rel_err(&float_values(&got), &want);
            assert!(err <= REL_TOL, "{kind:?} seed {seed}: rel err {err}");
        }
    }
}

fn relabel(g: &GraphCOO, perm: &[usize]) -> GraphCOO {
    let n = g.num_nodes;
    let mut feats = vec![0.0; g.node_features.len()];
    for v in 0..n {
        feats[perm[v] * g.node_dim..(perm[v] + 1) * g.node_dim].copy_from_slice(g.node_row(v));
    }
    let edges = g
        .edges
        .iter()
        .map(|&(s, d)| (perm[s as usize] as u32, perm[d as usize] as u32))
        .collect();
    GraphCOO::with_edge_features(n, edges, g.node_dim, feats, g.edge_dim, g.edge_features.clone()).unwrap()
}

#[test]
fn graph_outputs_are_invariant_to_node_relabeling() {
    for kind in ConvKind::ALL {
        for seed in 0..10 {
            let (spec, g, w) = random_case(kind, 9000 + seed, true);
            let perm: Vec<usize> = (0..g.num_nodes).rev().collect();
            let sim = Simulator::new(FloatArith, &spec, &w).unwrap();
            let a = sim.forward(&g).unwrap();
            let b = sim.forward(&relabel(&g, &perm)).unwrap();
            let err = rel_err(a.values(), b.values());
            assert!(err < 1e-9, "{kind:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn fixed_mode_is_deterministic_and_tiling_invariant() {
    let fmt: FixedPointFormat = "fixed<16,10>".parse().unwrap();
    for kind in ConvKind::ALL {
        let (spec, g, w) = random_case(kind, 77, true);
        let proj = project("det", spec.clone(), NumericMode::Fixed(fmt));
        let a = model_forward_raw(&proj, &g, &w).unwrap();
        let b = model_forward_raw(&proj, &g, &w).unwrap();
        assert_eq!(a, b);

        let mut untiled = proj.clone();
        untiled.model.parallelism = Default::default();
        assert_eq!(a, model_forward_raw(&untiled, &g, &w).unwrap(), "{kind:?}");
    }
}

#[test]
fn model_forward_rejects_oversized_graphs_and_bad_specs() {
    let (spec, g, w) = random_case(ConvKind::Gcn, 3, true);
    let mut proj = project("bounds", spec, NumericMode::Float);
    proj.max_nodes = 0;
    assert!(model_forward(&proj, &g, &w, NumericMode::Float).is_err());
    proj.max_nodes = 64;
    proj.max_edges = g.num_edges().saturating_sub(1);
    if g.num_edges() > 0 {
        assert!(model_forward(&proj, &g, &w, NumericMode::Float).is_err());
    }
}

#[test]
fn raw_outputs_require_fixed_mode() {
    let (spec, g, w) = random_case(ConvKind::Sage, 4, true);
    let proj = project("raw", spec, NumericMode::Float);
    assert!(model_forward_raw(&proj, &g, &w).is_err());
}

//! Input graphs and the per-graph tables the accelerator builds on the fly.
//!
//! Message passing aggregates over in-neighbors: for an edge `(src, dst)`
//! the source's embedding flows into the destination. Undirected graphs are
//! modelled by inserting both directions.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, Error, Result};

/// Graph in coordinate (edge-list) form with row-major feature tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCOO {
    pub num_nodes: usize,
    pub edges: Vec<(u32, u32)>,
    pub node_dim: usize,
    /// `num_nodes * node_dim`, row-major.
    pub node_features: Vec<f32>,
    pub edge_dim: usize,
    /// `num_edges * edge_dim`, row-major; empty when `edge_dim == 0`.
    pub edge_features: Vec<f32>,
}

impl GraphCOO {
    pub fn new(num_nodes: usize, edges: Vec<(u32, u32)>, node_dim: usize, node_features: Vec<f32>) -> Result<Self> {
        Self::with_edge_features(num_nodes, edges, node_dim, node_features, 0, Vec::new())
    }

    pub fn with_edge_features(
        num_nodes: usize,
        edges: Vec<(u32, u32)>,
        node_dim: usize,
        node_features: Vec<f32>,
        edge_dim: usize,
        edge_features: Vec<f32>,
    ) -> Result<Self> {
        let g = Self {
            num_nodes,
            edges,
            node_dim,
            node_features,
            edge_dim,
            edge_features,
        };
        g.check()?;
        Ok(g)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_row(&self, v: usize) -> &[f32] {
        &self.node_features[v * self.node_dim..(v + 1) * self.node_dim]
    }

    pub fn edge_row(&self, e: usize) -> &[f32] {
        &self.edge_features[e * self.edge_dim..(e + 1) * self.edge_dim]
    }

    fn check(&self) -> Result<()> {
        let n = self.num_nodes;
        if let Some((i, &(s, d))) = self
            .edges
            .iter()
            .enumerate()
            .find(|(_, &(s, d))| s as usize >= n || d as usize >= n)
        {
            return Err(Error::Graph(format!(
                "edge {i} = ({s}, {d}) out of range for {n} nodes"
            )));
        }
        if self.node_features.len() != n * self.node_dim {
            return Err(Error::Graph(format!(
                "node feature table has {} values, expected {}x{}",
                self.node_features.len(),
                n,
                self.node_dim
            )));
        }
        if self.edge_features.len() != self.edges.len() * self.edge_dim {
            return Err(Error::Graph(format!(
                "edge feature table has {} values, expected {}x{}",
                self.edge_features.len(),
                self.edges.len(),
                self.edge_dim
            )));
        }
        Ok(())
    }

    /// Buffer bounds of the enclosing project.
    pub fn check_bounds(&self, max_nodes: usize, max_edges: usize) -> Result<()> {
        if self.num_nodes > max_nodes {
            return Err(Error::Graph(format!(
                "{} nodes exceeds max_nodes = {max_nodes}",
                self.num_nodes
            )));
        }
        if self.num_edges() > max_edges {
            return Err(Error::Graph(format!(
                "{} edges exceeds max_edges = {max_edges}",
                self.num_edges()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeTables {
    pub in_degree: Vec<u32>,
    pub out_degree: Vec<u32>,
}

/// In-neighbor lists grouped by destination; `offsets` has `num_nodes + 1`
/// entries and node `v`'s sources are `neighbors[offsets[v]..offsets[v+1]]`.
/// `edge_ids` runs parallel to `neighbors` and names the originating edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborCSR {
    pub offsets: Vec<u32>,
    pub neighbors: Vec<u32>,
    pub edge_ids: Vec<u32>,
}

impl NeighborCSR {
    pub fn neighbors_of(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn edges_of(&self, v: usize) -> &[u32] {
        &self.edge_ids[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }
}

pub fn compute_degree_tables(g: &GraphCOO) -> DegreeTables {
    let mut in_degree = vec![0u32; g.num_nodes];
    let mut out_degree = vec![0u32; g.num_nodes];
    for &(s, d) in &g.edges {
        out_degree[s as usize] += 1;
        in_degree[d as usize] += 1;
    }
    DegreeTables { in_degree, out_degree }
}

/// Counting sort of edges by destination: one loop over nodes for the
/// exclusive prefix sum, one loop over edges to scatter. Stable in edge order.
pub fn build_neighbor_csr(g: &GraphCOO, deg: &DegreeTables) -> NeighborCSR {
    let n = g.num_nodes;
    let mut offsets = vec![0u32; n + 1];
    for v in 0..n {
        offsets[v + 1] = offsets[v] + deg.in_degree[v];
    }
    let mut cursor: Vec<u32> = offsets[..n].to_vec();
    let mut neighbors = vec![0u32; g.num_edges()];
    let mut edge_ids = vec![0u32; g.num_edges()];
    for (e, &(s, d)) in g.edges.iter().enumerate() {
        let slot = &mut cursor[d as usize];
        neighbors[*slot as usize] = s;
        edge_ids[*slot as usize] = e as u32;
        *slot += 1;
    }
    NeighborCSR {
        offsets,
        neighbors,
        edge_ids,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub avg_degree: f64,
    /// Mean of `ln(in_degree + 1)` pooled over every node of every graph.
    pub avg_log_degree: f64,
}

pub fn compute_dataset_stats(graphs: &[GraphCOO]) -> Result<DatasetStats> {
    if graphs.is_empty() {
        return Err(Error::Graph("dataset statistics need at least one graph".into()));
    }
    let count = graphs.len() as f64;
    let mut nodes = 0.0;
    let mut edges = 0.0;
    let mut degree = 0.0;
    let mut log_sum = 0.0;
    let mut total_nodes = 0usize;
    for g in graphs {
        nodes += g.num_nodes as f64;
        edges += g.num_edges() as f64;
        if g.num_nodes > 0 {
            degree += g.num_edges() as f64 / g.num_nodes as f64;
        }
        let deg = compute_degree_tables(g);
        log_sum += deg.in_degree.iter().map(|&d| (d as f64 + 1.0).ln()).sum::<f64>();
        total_nodes += g.num_nodes;
    }
    Ok(DatasetStats {
        avg_nodes: nodes / count,
        avg_edges: edges / count,
        avg_degree: degree / count,
        avg_log_degree: if total_nodes == 0 {
            0.0
        } else {
            log_sum / total_nodes as f64
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGraphSpec {
    pub nodes: usize,
    pub edges: usize,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub self_loops: bool,
    pub seed: u64,
}

/// `m` distinct directed edges without self-loops, features uniform in [-1, 1).
pub fn generate_random_graph(n: usize, m: usize, d: usize, seed: u64) -> Result<GraphCOO> {
    generate_graph(&RandomGraphSpec {
        nodes: n,
        edges: m,
        node_dim: d,
        edge_dim: 0,
        self_loops: false,
        seed,
    })
}

pub fn generate_graph(spec: &RandomGraphSpec) -> Result<GraphCOO> {
    let n = spec.nodes;
    if n == 0 {
        return Err(Error::Infeasible("a graph needs at least one node".into()));
    }
    let per_src = if spec.self_loops { n } else { n - 1 };
    let candidates = n * per_src;
    if spec.edges > candidates {
        return Err(Error::Infeasible(format!(
            "{} distinct edges requested but only {candidates} exist on {n} nodes",
            spec.edges
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let edges = index::sample(&mut rng, candidates, spec.edges)
        .into_iter()
        .map(|k| {
            let src = k / per_src;
            let mut dst = k % per_src;
            if !spec.self_loops && dst >= src {
                dst += 1;
            }
            (src as u32, dst as u32)
        })
        .collect::<Vec<_>>();
    let mut feature = || rng.gen_range(-1.0f32..1.0);
    let node_features = (0..n * spec.node_dim).map(|_| feature()).collect();
    let edge_features = (0..spec.edges * spec.edge_dim).map(|_| feature()).collect();
    GraphCOO::with_edge_features(n, edges, spec.node_dim, node_features, spec.edge_dim, edge_features)
}

const GRAPH_MAGIC: &[u8; 4] = b"GNNB";
const GRAPH_VERSION: u32 = 1;

/// Serialize to the `.gnnb-graph` little-endian layout.
pub fn write_graph<W: Write>(g: &GraphCOO, mut w: W) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(24 + g.num_edges() * 8 + g.node_features.len() * 4);
    buf.extend_from_slice(GRAPH_MAGIC);
    for v in [
        GRAPH_VERSION,
        g.num_nodes as u32,
        g.num_edges() as u32,
        g.node_dim as u32,
        g.edge_dim as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &(s, d) in &g.edges {
        buf.extend_from_slice(&s.to_le_bytes());
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for x in g.node_features.iter().chain(&g.edge_features) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_graph<R: Read>(mut r: R) -> Result<GraphCOO> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::GraphFile(e.to_string()))?;
    parse_graph(&bytes)
}

fn parse_graph(bytes: &[u8]) -> Result<GraphCOO> {
    let mut at = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let s = bytes
            .get(at..at + len)
            .ok_or_else(|| Error::GraphFile(format!("truncated at byte {at}")))?;
        at += len;
        Ok(s)
    };
    if take(4)? != GRAPH_MAGIC {
        return Err(Error::GraphFile("bad magic, expected GNNB".into()));
    }
    let mut u32s = [0u32; 5];
    for v in &mut u32s {
        *v = u32::from_le_bytes(take(4)?.try_into().unwrap());
    }
    let [version, num_nodes, num_edges, node_dim, edge_dim] = u32s.map(|v| v as usize);
    if version != GRAPH_VERSION as usize {
        return Err(Error::GraphFile(format!("unsupported version {version}")));
    }
    let edge_bytes = take(
        num_edges
            .checked_mul(8)
            .ok_or_else(|| Error::GraphFile("edge count overflow".into()))?,
    )?;
    let edges = edge_bytes
        .chunks_exact(8)
        .map(|c| {
            (
                u32::from_le_bytes(c[..4].try_into().unwrap()),
                u32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect();
    let mut floats = |count: usize| -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::GraphFile("feature table overflow".into()))?;
        Ok(take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let node_features = floats(num_nodes * node_dim)?;
    let edge_features = floats(num_edges * edge_dim)?;
    if at != bytes.len() {
        return Err(Error::GraphFile(format!("{} trailing bytes", bytes.len() - at)));
    }
    GraphCOO::with_edge_features(num_nodes, edges, node_dim, node_features, edge_dim, edge_features)
}

pub fn save_graph(g: &GraphCOO, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_graph(g, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_graph(path: &Path) -> Result<GraphCOO> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&bytes).map_err(|e| Error::GraphFile(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub graphs: Vec<DatasetEntry>,
}

/// A directory of `.gnnb-graph` files indexed by `manifest.json`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graphs: Vec<GraphCOO>,
    pub targets: Vec<Option<Vec<f64>>>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: DatasetManifest = from_json_str("dataset manifest", &text)?;
        let mut graphs = Vec::with_capacity(manifest.graphs.len());
        let mut targets = Vec::with_capacity(manifest.graphs.len());
        for entry in manifest.graphs {
            graphs.push(load_graph(&dir.join(&entry.file))?);
            targets.push(entry.target);
        }
        Ok(Self { graphs, targets })
    }

    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.graphs.len());
        let mut written = Vec::new();
        for (i, g) in self.graphs.iter().enumerate() {
            let file = format!("graph_{i:04}.gnnb-graph");
            let path = dir.join(&file);
            save_graph(g, &path)?;
            written.push(path);
            entries.push(DatasetEntry {
                file,
                target: self.targets.get(i).cloned().flatten(),
            });
        }
        let manifest_path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&DatasetManifest { graphs: entries })?;
        std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        written.push(manifest_path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(u32, u32)]) -> GraphCOO {
        GraphCOO::new(n, edges.to_vec(), 1, vec![0.0; n]).unwrap()
    }

    /// Brute force: for each destination, scan every edge in order.
    fn csr_oracle(g: &GraphCOO) -> (Vec<u32>, Vec<u32>) {
        let mut offsets = vec![0u32];
        let mut table = Vec::new();
        for v in 0..g.num_nodes as u32 {
            for &(s, d) in &g.edges {
                if d == v {
                    table.push(s);
                }
            }
            offsets.push(table.len() as u32);
        }
        (offsets, table)
    }

    #[test]
    fn degree_examples() {
        let d = compute_degree_tables(&graph(3, &[(0, 1), (1, 2), (2, 0)]));
        assert_eq!(d.in_degree, vec![1, 1, 1]);
        assert_eq!(d.out_degree, vec![1, 1, 1]);

        let d = compute_degree_tables(&graph(3, &[(0, 1), (1, 2), (2, 0), (0, 2)]));
        assert_eq!(d.in_degree, vec![1, 1, 2]);
        assert_eq!(d.out_degree, vec![2, 1, 1]);

        let d = compute_degree_tables(&graph(4, &[]));
        assert_eq!(d.in_degree, vec![0; 4]);
        assert_eq!(d.out_degree, vec![0; 4]);
    }

    #[test]
    fn csr_examples() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0), (0, 2)]);
        let csr = build_neighbor_csr(&g, &compute_degree_tables(&g));
        assert_eq!(csr.offsets, vec![0, 1, 2, 4]);
        assert_eq!(csr.neighbors, vec![2, 0, 1, 0]);
        assert_eq!(csr.edges_of(2), &[1, 3]);

        let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let csr = build_neighbor_csr(&g, &compute_degree_tables(&g));
        assert_eq!(csr.offsets, vec![0, 1, 2, 3]);
        assert_eq!(csr.neighbors, vec![2, 0, 1]);

        let g = graph(2, &[]);
        let csr = build_neighbor_csr(&g, &compute_degree_tables(&g));
        assert_eq!(csr.offsets, vec![0, 0, 0]);
        assert!(csr.neighbors.is_empty());
    }

    #[test]
    fn out_of_range_edge_rejected() {
        assert!(GraphCOO::new(2, vec![(0, 2)], 1, vec![0.0; 2]).is_err());
        assert!(GraphCOO::new(2, vec![(0, 1)], 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn bounds_check() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert!(g.check_bounds(3, 2).is_ok());
        assert!(g.check_bounds(2, 2).is_err());
        assert!(g.check_bounds(3, 1).is_err());
    }

    #[test]
    fn dataset_stats_examples() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let s = compute_dataset_stats(std::slice::from_ref(&g)).unwrap();
        assert_eq!((s.avg_nodes, s.avg_edges, s.avg_degree), (3.0, 3.0, 1.0));
        assert!((s.avg_log_degree - 2f64.ln()).abs() < 1e-12);

        let a = generate_random_graph(3, 3, 1, 1).unwrap();
        let b = generate_random_graph(5, 10, 1, 2).unwrap();
        let s = compute_dataset_stats(&[a, b]).unwrap();
        assert_eq!((s.avg_nodes, s.avg_edges, s.avg_degree), (4.0, 6.5, 1.5));

        assert!(compute_dataset_stats(&[]).is_err());
    }

    #[test]
    fn random_graph_examples() {
        let g = generate_random_graph(1, 0, 4, 0).unwrap();
        assert_eq!((g.num_nodes, g.num_edges()), (1, 0));
        assert!(g.node_features.iter().all(|x| (-1.0..1.0).contains(x)));
        assert_eq!(g.node_features.len(), 4);

        assert_eq!(
            generate_random_graph(8, 20, 3, 5).unwrap(),
            generate_random_graph(8, 20, 3, 5).unwrap()
        );

        let g = generate_random_graph(10, 30, 8, 7).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &(s, d) in &g.edges {
            assert_ne!(s, d);
            assert!(seen.insert((s, d)), "duplicate edge");
        }
        assert_eq!(seen.len(), 30);

        assert!(generate_random_graph(3, 7, 1, 0).is_err());
        assert!(generate_random_graph(3, 6, 1, 0).is_ok());
        assert!(generate_random_graph(0, 0, 1, 0).is_err());
    }

    #[test]
    fn graph_file_round_trip_with_edges() {
        let g = generate_graph(&RandomGraphSpec {
            nodes: 6,
            edges: 9,
            node_dim: 3,
            edge_dim: 2,
            self_loops: true,
            seed: 4,
        })
        .unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"GNNB");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(buf.len(), 24 + 9 * 8 + (18 + 18) * 4);
        assert_eq!(read_graph(&buf[..]).unwrap(), g);

        assert!(read_graph(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_graph(&bad[..]).is_err());
    }

    #[test]
    fn dataset_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset {
            graphs: vec![
                generate_random_graph(4, 5, 2, 0).unwrap(),
                generate_random_graph(3, 2, 2, 1).unwrap(),
            ],
            targets: vec![Some(vec![1.5]), None],
        };
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back.graphs, ds.graphs);
        assert_eq!(back.targets, ds.targets);
    }

    proptest! {
        #[test]
        fn csr_matches_oracle(n in 1usize..25, m in 0usize..80, seed in any::<u64>(), loops in any::<bool>()) {
            let cap = if loops { n * n } else { n * (n - 1) };
            let g = generate_graph(&RandomGraphSpec {
                nodes: n, edges: m.min(cap), node_dim: 1, edge_dim: 0, self_loops: loops, seed,
            }).unwrap();
            let deg = compute_degree_tables(&g);
            prop_assert_eq!(deg.in_degree.iter().sum::<u32>() as usize, g.num_edges());
            prop_assert_eq!(deg.out_degree.iter().sum::<u32>() as usize, g.num_edges());
            let csr = build_neighbor_csr(&g, &deg);
            let (offsets, table) = csr_oracle(&g);
            prop_assert_eq!(&csr.offsets, &offsets);
            prop_assert_eq!(&csr.neighbors, &table);
            for v in 0..n {
                prop_assert_eq!(csr.offsets[v + 1] - csr.offsets[v], deg.in_degree[v]);
                for (&src, &e) in csr.neighbors_of(v).iter().zip(csr.edges_of(v)) {
                    prop_assert_eq!(g.edges[e as usize], (src, v as u32));
                }
            }
            prop_assert_eq!(build_neighbor_csr(&g, &deg), csr);
        }
    }
}

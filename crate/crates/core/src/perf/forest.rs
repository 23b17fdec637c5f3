//! Random-forest regression: bagged CART trees with MSE splits.
//!
//! Every feature is considered at every split, every leaf holds at least
//! two samples, nodes with a single target value are not split, and there
//! is no depth cap. Each tree's bootstrap sample is put into a canonical order before
//! growing, so predictions depend only on the multiset of sampled rows and
//! not on the order rows were supplied in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TREES: usize = 10;
const MIN_LEAF: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    /// Training-row indices drawn for this tree.
    pub bootstrap: Vec<usize>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub seed: u64,
    pub trees: Vec<RegressionTree>,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    nodes: Vec<TreeNode>,
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64
}

impl Grower<'_> {
    /// Best `(feature, threshold, sse)` over all features, or `None` when no
    /// feature separates the rows.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in 0..self.x[rows[0]].len() {
            sorted.sort_by(|&a, &b| {
                self.x[a][f]
                    .total_cmp(&self.x[b][f])
                    .then(self.y[a].total_cmp(&self.y[b]))
            });
            let total: f64 = sorted.iter().map(|&r| self.y[r]).sum();
            let total_sq: f64 = sorted.iter().map(|&r| self.y[r] * self.y[r]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yk = self.y[sorted[k]];
                s += yk;
                sq += yk * yk;
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if a == b || k + 1 < MIN_LEAF || n - k - 1 < MIN_LEAF {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s) * (total - s) / nr);
                if best.is_none_or(|(_, _, b)| sse < b) {
                    best = Some((f, a + (b - a) / 2.0, sse));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: mean(self.y, rows),
        });
        let first = self.y[rows[0]];
        if rows.len() < 2 * MIN_LEAF || rows.iter().all(|&r| self.y[r] == first) {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(&l);
        let right = self.grow(&r);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[f64], bootstrap: Vec<usize>) -> RegressionTree {
    let mut rows = bootstrap.clone();
    rows.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].total_cmp(&y[b]))
    });
    let mut g = Grower {
        x,
        y,
        nodes: Vec::new(),
    };
    g.grow(&rows);
    RegressionTree {
        nodes: g.nodes,
        bootstrap,
    }
}

fn check_data(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Model("cannot fit on an empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Model(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().position(|r| r.len() != d) {
        return Err(Error::Model(format!(
            "row {bad} has {} features, expected {d}",
            x[bad].len()
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Model("training data contains a non-finite value".into()));
    }
    Ok(d)
}

/// Per-tree bootstrap indices (`n` draws with replacement each).
pub fn draw_bootstraps(n: usize, n_trees: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_trees)
        .map(|_| (0..n).map(|_| rng.gen_range(0..n)).collect())
        .collect()
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], n_trees: usize, seed: u64) -> Result<Self> {
        check_data(x, y)?;
        let boots = draw_bootstraps(x.len(), n_trees, seed);
        let mut f = Self::fit_with_bootstraps(x, y, boots)?;
        f.seed = seed;
        Ok(f)
    }

    /// Trees grown on the given bootstrap index lists (one per tree).
    pub fn fit_with_bootstraps(x: &[Vec<f64>], y: &[f64], bootstraps: Vec<Vec<usize>>) -> Result<Self> {
        let n_features = check_data(x, y)?;
        if bootstraps.is_empty() || bootstraps.iter().any(Vec::is_empty) {
            return Err(Error::Model("every tree needs a non-empty bootstrap".into()));
        }
        if let Some(&bad) = bootstraps.iter().flatten().find(|&&i| i >= x.len()) {
            return Err(Error::Model(format!("bootstrap index {bad} out of range")));
        }
        let trees = bootstraps.into_par_iter().map(|b| fit_tree(x, y, b)).collect();
        Ok(Self {
            n_features,
            seed: 0,
            trees,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Model(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(())
    }

    /// Structural sanity for forests read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Model("forest has no trees".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::Model(format!("tree {t} is empty")));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                if let TreeNode::Split {
                    feature, left, right, ..
                } = *node
                {
                    // children are always stored after their parent
                    if feature >= self.n_features
                        || left <= i
                        || right <= i
                        || left >= tree.nodes.len()
                        || right >= tree.nodes.len()
                    {
                        return Err(Error::Model(format!("tree {t} node {i} is malformed")));
                    }
                }
            }
        }
        Ok(())
    }
}

//! Forest-based latency/BRAM predictors fitted to a design database.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::database::DesignDatabase;
use super::forest::{RandomForest, DEFAULT_TREES};
use super::space::{DesignConfig, DesignContext};
use super::surrogate::{latency_ms, PerfEstimate};
use crate::error::{from_json_str, Error, Result};
use crate::model_ir::ConvKind;

pub const NUM_FEATURES: usize = 14;

/// One-hot conv kind (gcn, gin, pna, sage) followed by the ten numeric fields.
pub fn features(c: &DesignConfig) -> [f64; NUM_FEATURES] {
    let mut f = [0.0; NUM_FEATURES];
    let k = ConvKind::ALL.iter().position(|&k| k == c.conv).expect("known conv");
    f[k] = 1.0;
    let rest = [
        c.gnn_hidden_dim,
        c.gnn_out_dim,
        c.gnn_num_layers,
        c.skip as usize,
        c.mlp_hidden_dim,
        c.mlp_num_layers,
        c.gnn_p_hidden,
        c.gnn_p_out,
        c.mlp_p_in,
        c.mlp_p_hidden,
    ];
    for (dst, v) in f[4..].iter_mut().zip(rest) {
        *dst = v as f64;
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Latency,
    Bram,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Latency, Target::Bram];

    pub fn of(&self, db: &DesignDatabase) -> Vec<f64> {
        db.records
            .iter()
            .map(|r| match self {
                Target::Latency => r.latency_cycles as f64,
                Target::Bram => r.bram_18k as f64,
            })
            .collect()
    }
}

/// Space the forest regresses in. `Log` fits `ln(1 + y)`, which aligns the
/// MSE split criterion with relative error on targets spanning decades.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetScale {
    Linear,
    #[default]
    Log,
}

impl TargetScale {
    pub fn forward(&self, y: f64) -> f64 {
        match self {
            TargetScale::Linear => y,
            TargetScale::Log => y.ln_1p(),
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        match self {
            TargetScale::Linear => v,
            TargetScale::Log => v.exp_m1(),
        }
    }
}

impl std::str::FromStr for TargetScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(TargetScale::Linear),
            "log" => Ok(TargetScale::Log),
            _ => Err(Error::Model(format!("unknown target scale `{s}` (linear|log)"))),
        }
    }
}

/// A forest plus the target scale it was trained in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regressor {
    pub scale: TargetScale,
    pub forest: RandomForest,
}

impl Regressor {
    pub fn fit(x: &[Vec<f64>], y: &[f64], scale: TargetScale, seed: u64) -> Result<Self> {
        if y.iter().any(|v| *v < 0.0) && scale == TargetScale::Log {
            return Err(Error::Model("log target scale needs non-negative targets".into()));
        }
        let ty: Vec<f64> = y.iter().map(|v| scale.forward(*v)).collect();
        Ok(Self {
            scale,
            forest: RandomForest::fit(x, &ty, DEFAULT_TREES, seed)?,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.scale.inverse(self.forest.predict(x)).max(0.0)
    }
}

fn design_matrix(db: &DesignDatabase) -> Vec<Vec<f64>> {
    db.records.iter().map(|r| features(&r.config).to_vec()).collect()
}

pub fn fit_random_forest(db: &DesignDatabase, target: Target, scale: TargetScale, seed: u64) -> Result<Regressor> {
    if db.is_empty() {
        return Err(Error::Model("design database is empty".into()));
    }
    Regressor::fit(&design_matrix(db), &target.of(db), scale, seed)
}

/// Mean absolute percentage error in percent, skipping rows whose true value is zero.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    let terms: Vec<f64> = truth
        .iter()
        .zip(pred)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, p)| ((p - t) / t).abs())
        .collect();
    if terms.is_empty() {
        return Err(Error::Model("MAPE undefined: every true value is zero".into()));
    }
    Ok(100.0 * terms.iter().sum::<f64>() / terms.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub target: Target,
    pub folds: usize,
    pub scale: TargetScale,
    pub fold_mape: Vec<f64>,
    /// Mean of the per-fold MAPEs.
    pub mape: f64,
}

/// Shuffled `k`-fold cross-validation of a forest on one target.
pub fn cross_validate(
    db: &DesignDatabase,
    target: Target,
    scale: TargetScale,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let n = db.len();
    if k < 2 || k > n {
        return Err(Error::Model(format!("need 2 <= k <= {n} folds, got {k}")));
    }
    let x = design_matrix(db);
    let y = target.of(db);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::Model("MAPE undefined: every true value is zero".into()));
    }
    let mut fold_mape = Vec::with_capacity(k);
    for fold in 0..k {
        let (lo, hi) = (fold * n / k, (fold + 1) * n / k);
        let test = &order[lo..hi];
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = Regressor::fit(&tx, &ty, scale, seed.wrapping_add(fold as u64 + 1))?;
        let t: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let p: Vec<f64> = test.iter().map(|&i| model.predict(&x[i])).collect();
        // folds whose targets are all zero contribute nothing
        if let Ok(m) = mape(&t, &p) {
            fold_mape.push(m);
        }
    }
    let mape = fold_mape.iter().sum::<f64>() / fold_mape.len() as f64;
    Ok(CvReport {
        target,
        folds: k,
        scale,
        fold_mape,
        mape,
    })
}

/// Both predictors plus the context they were trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfModels {
    pub format: String,
    pub provenance: String,
    pub train_size: usize,
    pub context: DesignContext,
    pub latency: Regressor,
    pub bram: Regressor,
}

pub const PERF_MODELS_FORMAT: &str = "gnnb-perf-models-v1";

impl PerfModels {
    pub fn fit(db: &DesignDatabase, ctx: &DesignContext, scale: TargetScale, seed: u64) -> Result<Self> {
        Ok(Self {
            format: PERF_MODELS_FORMAT.into(),
            provenance: db.provenance().unwrap_or_default().into(),
            train_size: db.len(),
            context: ctx.clone(),
            latency: fit_random_forest(db, Target::Latency, scale, seed)?,
            bram: fit_random_forest(db, Target::Bram, scale, seed.wrapping_add(1))?,
        })
    }

    pub fn predict(&self, c: &DesignConfig) -> PerfEstimate {
        let f = features(c);
        let cycles = self.latency.predict(&f);
        let bram = self.bram.predict(&f);
        PerfEstimate {
            latency_cycles: cycles.round() as u64,
            latency_ms: latency_ms(cycles, self.context.clock_mhz),
            bram_18k: bram.round() as u64,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = from_json_str("performance models", text)?;
        if m.format != PERF_MODELS_FORMAT {
            return Err(Error::Model(format!("unsupported model format `{}`", m.format)));
        }
        for f in [&m.latency.forest, &m.bram.forest] {
            f.validate()?;
            if f.n_features != NUM_FEATURES {
                return Err(Error::Model(format!(
                    "forest has {} features, expected {NUM_FEATURES}",
                    f.n_features
                )));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

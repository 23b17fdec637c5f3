//! Design-space exploration: minimum predicted latency under a BRAM budget.

use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perf::{surrogate_estimate, DesignConfig, DesignContext, DesignSpace, PerfEstimate, PerfModels};

pub enum Predictor<'a> {
    Forest(&'a PerfModels),
    Surrogate(&'a DesignContext),
}

impl Predictor<'_> {
    pub fn predict(&self, c: &DesignConfig) -> PerfEstimate {
        match self {
            Predictor::Forest(m) => m.predict(c),
            Predictor::Surrogate(ctx) => surrogate_estimate(c, ctx),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Forest(_) => "forest",
            Predictor::Surrogate(_) => "surrogate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Exhaustive,
    /// `n` distinct points drawn uniformly without replacement.
    Sample {
        n: u64,
        seed: u64,
    },
}

impl Strategy {
    /// Parses `exhaustive` or `sample:N`; `seed` applies to the latter.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        if s == "exhaustive" {
            return Ok(Strategy::Exhaustive);
        }
        let n = s
            .strip_prefix("sample:")
            .and_then(|n| u64::from_str(n).ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Space(format!("unknown strategy `{s}` (exhaustive|sample:N)")))?;
        Ok(Strategy::Sample { n, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    pub config: DesignConfig,
    pub estimate: PerfEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DseResult {
    pub predictor: String,
    pub bram_budget: u64,
    pub evaluated: usize,
    pub feasible: usize,
    /// `None` when no evaluated design fits the budget.
    pub best: Option<DesignPoint>,
    /// Latency/BRAM Pareto front over every evaluated design, by ascending BRAM.
    pub pareto: Vec<DesignPoint>,
    pub elapsed_s: f64,
}

fn configs(space: &DesignSpace, strategy: Strategy) -> Result<Vec<DesignConfig>> {
    space.validate()?;
    let size = space.size();
    match strategy {
        Strategy::Exhaustive => {
            if size > usize::MAX as u64 {
                return Err(Error::Space(format!(
                    "space of {size} points is too large to enumerate"
                )));
            }
            Ok(space.iter().collect())
        }
        Strategy::Sample { n, seed } => {
            let take = n.min(size);
            if size > usize::MAX as u64 {
                return Err(Error::Space(format!("space of {size} points is too large to sample")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = index::sample(&mut rng, size as usize, take as usize).into_vec();
            idx.sort_unstable();
            Ok(idx.into_iter().map(|i| space.config_at(i as u64)).collect())
        }
    }
}

/// Total order used everywhere a single winner is chosen.
fn rank(p: &DesignPoint) -> (u64, u64, DesignConfig) {
    (p.estimate.latency_cycles, p.estimate.bram_18k, p.config)
}

/// Points not dominated in (latency, BRAM), ascending BRAM.
pub fn pareto_front(points: &[DesignPoint]) -> Vec<DesignPoint> {
    let mut sorted: Vec<&DesignPoint> = points.iter().collect();
    sorted.sort_by_key(|p| (p.estimate.bram_18k, p.estimate.latency_cycles, p.config));
    let mut front: Vec<DesignPoint> = Vec::new();
    for p in sorted {
        if front
            .last()
            .is_none_or(|q| p.estimate.latency_cycles < q.estimate.latency_cycles)
        {
            front.push(p.clone());
        }
    }
    front
}

pub fn evaluate(space: &DesignSpace, predictor: &Predictor, strategy: Strategy) -> Result<Vec<DesignPoint>> {
    let cfgs = configs(space, strategy)?;
    Ok(cfgs
        .into_par_iter()
        .map(|config| DesignPoint {
            estimate: predictor.predict(&config),
            config,
        })
        .collect())
}

pub fn run_dse(space: &DesignSpace, bram_budget: u64, predictor: &Predictor, strategy: Strategy) -> Result<DseResult> {
    let start = Instant::now();
    let points = evaluate(space, predictor, strategy)?;
    let feasible: Vec<&DesignPoint> = points.iter().filter(|p| p.estimate.bram_18k <= bram_budget).collect();
    let best = feasible.iter().min_by_key(|p| rank(p)).map(|p| (*p).clone());
    Ok(DseResult {
        predictor: predictor.name().into(),
        bram_budget,
        evaluated: points.len(),
        feasible: feasible.len(),
        best,
        pareto: pareto_front(&points),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DseTiming {
    pub evaluated: usize,
    pub total_s: f64,
    pub per_design_ms: f64,
}

/// Wall-clock cost of one DSE run, normalised per design.
pub fn time_dse(space: &DesignSpace, bram_budget: u64, predictor: &Predictor, strategy: Strategy) -> Result<DseTiming> {
    let start = Instant::now();
    let r = run_dse(space, bram_budget, predictor, strategy)?;
    let total_s = start.elapsed().as_secs_f64();
    Ok(DseTiming {
        evaluated: r.evaluated,
        total_s,
        per_design_ms: 1e3 * total_s / r.evaluated.max(1) as f64,
    })
}

//! Repeated random-split evaluation: train on a fraction of the instances,
//! test on the rest, repeat with derived seeds and aggregate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, AggregateReport, MetricsReport};
use crate::model::MlsplModel;
use crate::selfpace::SchemeKind;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol { train_fraction: 0.3, repeats: 10, seed: 0 }
    }
}

impl Protocol {
    /// Seed of repeat `r`, used for both the split and training.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        splitmix64(self.seed.wrapping_add(r as u64))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Optional pace-parameter search run inside each repeat's training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda0: Vec<f64>,
    pub mu: Vec<f64>,
    pub holdout_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lambda0: vec![1e-5, 1e-4, 1e-3, 1e-2], mu: vec![1.1, 1.2, 1.3, 1.4, 1.5], holdout_fraction: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda0: f64,
    pub mu: f64,
    pub validation_average_precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridPoint,
    pub points: Vec<GridPoint>,
}

/// Picks `(λ₀, μ)` by average precision on a holdout carved from `train`;
/// ties keep the earlier grid point.
pub fn grid_search(train: &Dataset, cfg: &TrainConfig, grid: &GridSpec, seed: u64) -> Result<GridResult> {
    if grid.lambda0.is_empty() || grid.mu.is_empty() {
        return Err(Error::InvalidInput("empty pace grid".into()));
    }
    let spec = SplitSpec::new(1.0 - grid.holdout_fraction, seed)?;
    let (fit_part, holdout) = split(train, &spec)?;
    let candidates: Vec<(f64, f64)> = grid.lambda0.iter().flat_map(|&l| grid.mu.iter().map(move |&m| (l, m))).collect();
    let points: Vec<GridPoint> = candidates
        .par_iter()
        .map(|&(lambda0, mu)| {
            let cfg = TrainConfig { lambda0, mu, ..cfg.clone() };
            let model = MlsplModel::fit(&fit_part, &cfg)?;
            let (_, report) = model.evaluate(&holdout)?;
            Ok(GridPoint { lambda0, mu, validation_average_precision: report.average_precision })
        })
        .collect::<Result<_>>()?;
    let mut best = points[0].clone();
    for p in &points[1..] {
        if p.validation_average_precision > best.validation_average_precision {
            best = p.clone();
        }
    }
    Ok(GridResult { best, points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub report: MetricsReport,
    pub sweeps: usize,
    pub converged: bool,
    pub grid: Option<GridResult>,
    pub train_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub method: String,
    pub repeats: Vec<RepeatOutcome>,
    pub aggregate: AggregateReport,
}

fn run_repeat(ds: &Dataset, cfg: &TrainConfig, protocol: &Protocol, grid: Option<&GridSpec>, r: usize) -> Result<RepeatOutcome> {
    let seed = protocol.repeat_seed(r);
    let (train, test) = split(ds, &SplitSpec::new(protocol.train_fraction, seed)?)?;
    let start = Instant::now();
    let mut cfg = TrainConfig { seed, ..cfg.clone() };
    let grid = match grid {
        Some(g) => {
            let result = grid_search(&train, &cfg, g, seed)?;
            cfg.lambda0 = result.best.lambda0;
            cfg.mu = result.best.mu;
            Some(result)
        }
        None => None,
    };
    let model = MlsplModel::fit(&train, &cfg)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let (_, report) = model.evaluate(&test)?;
    Ok(RepeatOutcome {
        repeat: r,
        seed,
        n_train: train.n_instances(),
        n_test: test.n_instances(),
        report,
        sweeps: model.history.len(),
        converged: model.converged,
        grid,
        train_seconds,
    })
}

/// Runs the protocol for one configuration; repeats run concurrently.
pub fn benchmark(ds: &Dataset, method: &str, cfg: &TrainConfig, protocol: &Protocol, grid: Option<&GridSpec>) -> Result<BenchmarkResult> {
    if protocol.repeats == 0 {
        return Err(Error::InvalidInput("at least one repeat is required".into()));
    }
    let repeats: Vec<RepeatOutcome> =
        (0..protocol.repeats).into_par_iter().map(|r| run_repeat(ds, cfg, protocol, grid, r)).collect::<Result<_>>()?;
    let reports: Vec<MetricsReport> = repeats.iter().map(|r| r.report).collect();
    Ok(BenchmarkResult { method: method.to_string(), aggregate: aggregate(&reports)?, repeats })
}

/// Runs the same protocol (hence the same splits) once per scheme.
pub fn scheme_compare(
    ds: &Dataset,
    cfg: &TrainConfig,
    protocol: &Protocol,
    grid: Option<&GridSpec>,
) -> Result<Vec<(SchemeKind, BenchmarkResult)>> {
    SchemeKind::ALL
        .iter()
        .map(|&scheme| {
            let cfg = TrainConfig { scheme, ..cfg.clone() };
            Ok((scheme, benchmark(ds, scheme.name(), &cfg, protocol, grid)?))
        })
        .collect()
}

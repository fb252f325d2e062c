//! The five multi-label evaluation criteria and their aggregation over
//! repeats.
//!
//! Ranks count from 1 at the highest score; tied labels all receive the
//! largest rank of their group. Ranking criteria skip instances where the
//! criterion is undefined and report how many instances were used.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::argmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    HammingLoss,
    RankingLoss,
    OneError,
    Coverage,
    AveragePrecision,
}

impl Criterion {
    pub const ALL: [Criterion; 5] =
        [Criterion::HammingLoss, Criterion::RankingLoss, Criterion::OneError, Criterion::Coverage, Criterion::AveragePrecision];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::HammingLoss => "hamming_loss",
            Criterion::RankingLoss => "ranking_loss",
            Criterion::OneError => "one_error",
            Criterion::Coverage => "coverage",
            Criterion::AveragePrecision => "average_precision",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Criterion::HammingLoss => "Hamming loss",
            Criterion::RankingLoss => "Ranking loss",
            Criterion::OneError => "One error",
            Criterion::Coverage => "Coverage",
            Criterion::AveragePrecision => "Average precision",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Criterion::AveragePrecision
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A criterion value and the number of instances it averages over. The
/// value is NaN when no instance qualifies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub n_eval: usize,
}

impl MetricValue {
    fn mean(sum: f64, n_eval: usize) -> Self {
        let value = if n_eval == 0 { f64::NAN } else { sum / n_eval as f64 };
        MetricValue { value, n_eval }
    }
}

fn check_shapes(rows: usize, cols: usize, truth: ArrayView2<i8>) -> Result<()> {
    if truth.dim() != (rows, cols) {
        return Err(Error::Dimension(format!("predictions are {rows}×{cols}, ground truth is {:?}", truth.dim())));
    }
    Ok(())
}

/// Rank of every label in one score row (1 = best, ties share the worst rank).
pub fn ranks(scores: &[f64]) -> Vec<usize> {
    scores.iter().map(|&s| scores.iter().filter(|&&t| t >= s).count()).collect()
}

/// Fraction of instance-label pairs where prediction and truth disagree.
pub fn hamming_loss(predicted: ArrayView2<bool>, truth: ArrayView2<i8>) -> Result<MetricValue> {
    let (n, l) = predicted.dim();
    check_shapes(n, l, truth)?;
    let wrong = predicted.iter().zip(truth.iter()).filter(|(&p, &y)| p != (y > 0)).count();
    Ok(MetricValue { value: wrong as f64 / (n * l) as f64, n_eval: n })
}

/// Fraction of instances whose top-ranked label is irrelevant.
pub fn one_error(scores: ArrayView2<f64>, truth: ArrayView2<i8>) -> Result<MetricValue> {
    check_shapes(scores.nrows(), scores.ncols(), truth)?;
    let (mut sum, mut n_eval) = (0.0, 0);
    for (s, y) in scores.rows().into_iter().zip(truth.rows()) {
        if !y.iter().any(|&v| v > 0) {
            continue;
        }
        let s = s.to_vec();
        n_eval += 1;
        if y[argmax(&s)] <= 0 {
            sum += 1.0;
        }
    }
    Ok(MetricValue::mean(sum, n_eval))
}

/// Average depth, minus one, needed to cover every relevant label.
pub fn coverage(scores: ArrayView2<f64>, truth: ArrayView2<i8>) -> Result<MetricValue> {
    check_shapes(scores.nrows(), scores.ncols(), truth)?;
    let (mut sum, mut n_eval) = (0.0, 0);
    for (s, y) in scores.rows().into_iter().zip(truth.rows()) {
        let r = ranks(&s.to_vec());
        let worst = r.iter().zip(y.iter()).filter(|(_, &y)| y > 0).map(|(&r, _)| r).max();
        if let Some(worst) = worst {
            sum += (worst - 1) as f64;
            n_eval += 1;
        }
    }
    Ok(MetricValue::mean(sum, n_eval))
}

/// Fraction of (relevant, irrelevant) pairs ordered wrongly; a tie counts
/// as wrong.
pub fn ranking_loss(scores: ArrayView2<f64>, truth: ArrayView2<i8>) -> Result<MetricValue> {
    check_shapes(scores.nrows(), scores.ncols(), truth)?;
    let (mut sum, mut n_eval) = (0.0, 0);
    for (s, y) in scores.rows().into_iter().zip(truth.rows()) {
        let mut pos: Vec<f64> = Vec::new();
        let mut neg: Vec<f64> = Vec::new();
        for (&sc, &yl) in s.iter().zip(y.iter()) {
            if yl > 0 {
                pos.push(sc);
            } else {
                neg.push(sc);
            }
        }
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        // for each relevant score, count irrelevant scores ≥ it
        neg.sort_by(f64::total_cmp);
        let bad: usize = pos.iter().map(|&p| neg.len() - neg.partition_point(|&q| q < p)).sum();
        sum += bad as f64 / (pos.len() * neg.len()) as f64;
        n_eval += 1;
    }
    Ok(MetricValue::mean(sum, n_eval))
}

pub fn average_precision(scores: ArrayView2<f64>, truth: ArrayView2<i8>) -> Result<MetricValue> {
    check_shapes(scores.nrows(), scores.ncols(), truth)?;
    let (mut sum, mut n_eval) = (0.0, 0);
    for (s, y) in scores.rows().into_iter().zip(truth.rows()) {
        let r = ranks(&s.to_vec());
        let relevant: Vec<usize> = (0..r.len()).filter(|&l| y[l] > 0).collect();
        if relevant.is_empty() {
            continue;
        }
        let prec: f64 = relevant
            .iter()
            .map(|&l| {
                let above = relevant.iter().filter(|&&k| r[k] <= r[l]).count();
                above as f64 / r[l] as f64
            })
            .sum();
        sum += prec / relevant.len() as f64;
        n_eval += 1;
    }
    Ok(MetricValue::mean(sum, n_eval))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub hamming_loss: usize,
    pub ranking_loss: usize,
    pub one_error: usize,
    pub coverage: usize,
    pub average_precision: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hamming_loss: f64,
    pub ranking_loss: f64,
    pub one_error: f64,
    pub coverage: f64,
    pub average_precision: f64,
    pub n_eval: EvalCounts,
}

impl MetricsReport {
    pub fn get(&self, c: Criterion) -> f64 {
        match c {
            Criterion::HammingLoss => self.hamming_loss,
            Criterion::RankingLoss => self.ranking_loss,
            Criterion::OneError => self.one_error,
            Criterion::Coverage => self.coverage,
            Criterion::AveragePrecision => self.average_precision,
        }
    }

    /// Checks every criterion against its admissible range for `n_labels`
    /// labels; NaN (no qualifying instance) is accepted.
    pub fn within_ranges(&self, n_labels: usize) -> bool {
        let ok = |v: f64, lo: f64, hi: f64| v.is_nan() || (lo..=hi).contains(&v);
        ok(self.hamming_loss, 0.0, 1.0)
            && ok(self.ranking_loss, 0.0, 1.0)
            && ok(self.one_error, 0.0, 1.0)
            && ok(self.coverage, 0.0, n_labels.saturating_sub(1) as f64)
            && (self.average_precision.is_nan() || (self.average_precision > 0.0 && self.average_precision <= 1.0))
    }
}

pub fn evaluate_all(scores: ArrayView2<f64>, predicted: ArrayView2<bool>, truth: ArrayView2<i8>) -> Result<MetricsReport> {
    let h = hamming_loss(predicted, truth)?;
    let r = ranking_loss(scores, truth)?;
    let o = one_error(scores, truth)?;
    let c = coverage(scores, truth)?;
    let a = average_precision(scores, truth)?;
    Ok(MetricsReport {
        hamming_loss: h.value,
        ranking_loss: r.value,
        one_error: o.value,
        coverage: c.value,
        average_precision: a.value,
        n_eval: EvalCounts {
            hamming_loss: h.n_eval,
            ranking_loss: r.n_eval,
            one_error: o.n_eval,
            coverage: c.n_eval,
            average_precision: a.n_eval,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repeat.
    pub std: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub repeats: usize,
    pub hamming_loss: Summary,
    pub ranking_loss: Summary,
    pub one_error: Summary,
    pub coverage: Summary,
    pub average_precision: Summary,
}

impl AggregateReport {
    pub fn get(&self, c: Criterion) -> Summary {
        match c {
            Criterion::HammingLoss => self.hamming_loss,
            Criterion::RankingLoss => self.ranking_loss,
            Criterion::OneError => self.one_error,
            Criterion::Coverage => self.coverage,
            Criterion::AveragePrecision => self.average_precision,
        }
    }
}

fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    if values.iter().all(|&v| v == values[0]) {
        return Summary { mean: values[0], std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 { 0.0 } else { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    Summary { mean, std }
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("nothing to aggregate".into()));
    }
    let s = |c: Criterion| summarize(&reports.iter().map(|r| r.get(c)).collect::<Vec<_>>());
    Ok(AggregateReport {
        repeats: reports.len(),
        hamming_loss: s(Criterion::HammingLoss),
        ranking_loss: s(Criterion::RankingLoss),
        one_error: s(Criterion::OneError),
        coverage: s(Criterion::Coverage),
        average_precision: s(Criterion::AveragePrecision),
    })
}

/// Aligned text table: one row per criterion, one `mean ± std` column per
/// named report.
pub fn format_table(columns: &[(String, AggregateReport)]) -> String {
    let mut cells: Vec<Vec<String>> =
        vec![std::iter::once("Criterion".to_string()).chain(columns.iter().map(|(name, _)| name.clone())).collect()];
    for c in Criterion::ALL {
        let arrow = if c.higher_is_better() { "↑" } else { "↓" };
        cells.push(std::iter::once(format!("{} {arrow}", c.title())).chain(columns.iter().map(|(_, r)| r.get(c).to_string())).collect());
    }
    let widths: Vec<usize> = (0..cells[0].len()).map(|k| cells.iter().map(|row| row[k].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (cell, &w))| {
                let pad = w - cell.chars().count();
                if k == 0 {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Flips every predicted label.
pub fn complement(predicted: ArrayView2<bool>) -> Array2<bool> {
    predicted.mapv(|b| !b)
}

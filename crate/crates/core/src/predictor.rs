//! Test-time inference: regress a code for each unseen instance, then score
//! every label on the augmented vector `[x; q̂]`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wsvm::LinearModel;

/// One ridge regressor per code coordinate, each with an unpenalized
/// intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodePredictor {
    /// `m × d`
    coefs: Array2<f64>,
    intercepts: Vec<f64>,
    ridge: f64,
}

impl CodePredictor {
    pub fn n_codes(&self) -> usize {
        self.coefs.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.coefs.ncols()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Unprojected regression output for one instance.
    pub fn raw(&self, x: ArrayView1<f64>) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension(format!("code predictor expects {} features, got {}", self.n_features(), x.len())));
        }
        Ok(self.coefs.rows().into_iter().zip(&self.intercepts).map(|(r, b)| r.dot(&x) + b).collect())
    }

    /// Predicted code, projected onto the probability simplex.
    pub fn predict_code(&self, x: ArrayView1<f64>) -> Result<Vec<f64>> {
        Ok(project_simplex(&self.raw(x)?))
    }

    /// `m × n` matrix of predicted codes for the rows of `features`.
    pub fn predict_codes(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let cols: Vec<Vec<f64>> = features.axis_iter(Axis(0)).into_par_iter().map(|x| self.predict_code(x)).collect::<Result<_>>()?;
        Ok(Array2::from_shape_fn((self.n_codes(), cols.len()), |(j, i)| cols[i][j]))
    }
}

/// Fits `r_j(x) = c_j·x + b_j` minimizing `Σ_i (q_ji − r_j(x_i))² + γ||c_j||²`
/// for every row `j` of `codes` (`m × n`).
pub fn fit_code_predictor(features: ArrayView2<f64>, codes: ArrayView2<f64>, gamma: f64) -> Result<CodePredictor> {
    let (n, d) = features.dim();
    let m = codes.nrows();
    if codes.ncols() != n {
        return Err(Error::Dimension(format!("{n} feature rows but {} code columns", codes.ncols())));
    }
    if n == 0 {
        return Err(Error::InvalidInput("code regression needs at least one instance".into()));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain(format!("ridge must be nonnegative, got {gamma}")));
    }
    let x_mean = features.mean_axis(Axis(0)).expect("n > 0");
    let q_mean = codes.mean_axis(Axis(1)).expect("n > 0");
    let xc = DMatrix::from_fn(n, d, |i, j| features[[i, j]] - x_mean[j]);
    let qc = DMatrix::from_fn(n, m, |i, j| codes[[j, i]] - q_mean[j]);
    let mut gram = xc.transpose() * &xc;
    for j in 0..d {
        gram[(j, j)] += gamma;
    }
    let singular = || Error::Singular(format!("code regression normal equations are singular with ridge {gamma}; use a positive ridge"));
    let chol = gram.clone().cholesky().ok_or_else(singular)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v * v), hi.max(v * v)));
    if lo <= 1e-13 * hi.max(1.0) {
        return Err(singular());
    }
    let rhs = xc.transpose() * qc;
    let beta = chol.solve(&rhs);
    let coefs = Array2::from_shape_fn((m, d), |(j, k)| beta[(k, j)]);
    let intercepts = (0..m).map(|j| q_mean[j] - DVector::from_fn(d, |k, _| x_mean[k]).dot(&beta.column(j))).collect();
    Ok(CodePredictor { coefs, intercepts, ridge: gamma })
}

/// Euclidean projection onto `{q ≥ 0, Σq = 1}` by the sorted-threshold
/// method.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `score_l = w_l·[x; code] + b_l` for every label model.
pub fn score(models: &[LinearModel], x: ArrayView1<f64>, code: &[f64]) -> Result<Vec<f64>> {
    let z: Vec<f64> = x.iter().chain(code).copied().collect();
    models.iter().map(|m| m.decision_value(&z)).collect()
}

/// Labels with positive score; the top-scoring label (lowest index on ties)
/// when none is positive.
pub fn decide(scores: &[f64]) -> Vec<bool> {
    let mut set: Vec<bool> = scores.iter().map(|&s| s > 0.0).collect();
    if !set.iter().any(|&b| b) && !scores.is_empty() {
        set[argmax(scores)] = true;
    }
    set
}

/// Lowest index among the maxima.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `n_test × L`
    pub scores: Array2<f64>,
    pub label_sets: Array2<bool>,
}

/// Scores and label sets for every row of `features` (already scaled).
pub fn predict(models: &[LinearModel], codes: &CodePredictor, features: ArrayView2<f64>) -> Result<Prediction> {
    let l = models.len();
    let rows: Vec<Vec<f64>> = features
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|x| {
            let q = codes.predict_code(x)?;
            score(models, x, &q)
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    let scores = Array2::from_shape_fn((n, l), |(i, k)| rows[i][k]);
    let mut label_sets = Array2::from_elem((n, l), false);
    for (i, row) in rows.iter().enumerate() {
        for (k, b) in decide(row).into_iter().enumerate() {
            label_sets[[i, k]] = b;
        }
    }
    Ok(Prediction { scores, label_sets })
}

/// Writes scores as CSV with the label names as header.
pub fn write_scores_csv<W: Write>(scores: ArrayView2<f64>, label_names: &[String], out: W) -> Result<()> {
    if label_names.len() != scores.ncols() {
        return Err(Error::Dimension(format!("{} label names for {} score columns", label_names.len(), scores.ncols())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(label_names)?;
    for row in scores.rows() {
        w.write_record(row.iter().map(|s| s.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

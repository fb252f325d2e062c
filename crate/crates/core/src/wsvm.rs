//! Instance-weighted L2-regularized hinge-loss linear classifier.
//!
//! Solves
//!
//! ```text
//! min_{w,b}  Σ_i v_i · max(0, 1 − y_i (w·z_i + b)) + α ||w||²
//! ```
//!
//! through its dual. Dividing by `2α` gives the usual `½||w||² + Σ C_i ξ_i`
//! form with per-instance box `C_i = v_i / (2α)`. With an (unregularized)
//! bias the dual carries the equality `Σ a_i y_i = 0` and is solved by SMO
//! with second-order working-set selection; without a bias, by dual
//! coordinate descent in a seeded shuffled order. Both run on a precomputed
//! Gram matrix and stop on the relative duality gap.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// One weighted binary problem over augmented inputs `z_i`.
#[derive(Clone, Copy, Debug)]
pub struct WeightedProblem<'a> {
    inputs: ArrayView2<'a, f64>,
    targets: ArrayView1<'a, f64>,
    weights: ArrayView1<'a, f64>,
    alpha: f64,
}

impl<'a> WeightedProblem<'a> {
    /// `inputs` is `n × p`, `targets` in `{−1, +1}`, `weights` in `[0, 1]`.
    pub fn new(inputs: ArrayView2<'a, f64>, targets: ArrayView1<'a, f64>, weights: ArrayView1<'a, f64>, alpha: f64) -> Result<Self> {
        let n = inputs.nrows();
        if targets.len() != n || weights.len() != n {
            return Err(Error::Dimension(format!("{n} inputs, {} targets, {} weights", targets.len(), weights.len())));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("regularization must be positive, got {alpha}")));
        }
        if inputs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("SVM inputs".into()));
        }
        if let Some(t) = targets.iter().find(|&&t| t != 1.0 && t != -1.0) {
            return Err(Error::InvalidInput(format!("target {t} is not -1 or +1")));
        }
        if let Some(v) = weights.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("instance weight {v} outside [0, 1]")));
        }
        Ok(WeightedProblem { inputs, targets, weights, alpha })
    }

    pub fn n_instances(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'a, f64> {
        self.inputs
    }

    pub fn targets(&self) -> ArrayView1<'a, f64> {
        self.targets
    }

    pub fn weights(&self) -> ArrayView1<'a, f64> {
        self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Upper bound on each dual variable.
    pub fn box_bound(&self, i: usize) -> f64 {
        self.weights[i] / (2.0 * self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel { weights: vec![0.0; dim], bias: 0.0 }
    }

    /// `w·z + b`
    pub fn decision_value(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.weights.len() {
            return Err(Error::Dimension(format!("model has {} weights, input has {} entries", self.weights.len(), z.len())));
        }
        Ok(dot(&self.weights, z) + self.bias)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.weights, &self.weights)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvmOptions {
    /// Target relative duality gap `(P − D) / max(1, |P|)`.
    pub tol: f64,
    /// Cap on pair (or coordinate) updates.
    pub max_iter: usize,
    pub fit_bias: bool,
    /// Seeds the coordinate order when `fit_bias` is off.
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions { tol: 1e-6, max_iter: 5_000_000, fit_bias: true, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SvmSolution {
    pub model: LinearModel,
    /// Dual variables in the `½||w||² + Σ C_i ξ_i` scaling, `0 ≤ a_i ≤ C_i`.
    pub duals: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmSolution {
    pub fn relative_gap(&self) -> f64 {
        (self.primal - self.dual) / self.primal.abs().max(1.0)
    }
}

/// `Z Zᵀ` for the rows of `inputs`.
pub fn gram_matrix(inputs: ArrayView2<f64>) -> Array2<f64> {
    inputs.dot(&inputs.t())
}

pub fn train_weighted_svm(prob: &WeightedProblem, opts: &SvmOptions) -> Result<SvmSolution> {
    let gram = gram_matrix(prob.inputs());
    train_with_gram(prob, gram.view(), opts)
}

/// Trains with a caller-supplied Gram matrix of `prob`'s inputs, so several
/// problems over the same inputs can share it.
pub fn train_with_gram(prob: &WeightedProblem, gram: ArrayView2<f64>, opts: &SvmOptions) -> Result<SvmSolution> {
    let n = prob.n_instances();
    if gram.dim() != (n, n) {
        return Err(Error::Dimension(format!("Gram matrix is {:?}, expected ({n}, {n})", gram.dim())));
    }
    // zero-weight instances contribute nothing and are dropped
    let active: Vec<usize> = (0..n).filter(|&i| prob.weights[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(SvmSolution {
            model: LinearModel::zeros(prob.dim()),
            duals: vec![0.0; n],
            primal: 0.0,
            dual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let mut dcd = DualState::new(prob, gram, &active);
    let (iterations, converged) = if opts.fit_bias { dcd.run_smo(opts) } else { dcd.run_coordinate(opts) };
    if !converged {
        log::warn!("weighted SVM stopped after {iterations} updates with relative gap {:.3e}", dcd.gap_estimate(opts.fit_bias).2);
    }

    let mut duals = vec![0.0; n];
    for (k, &i) in active.iter().enumerate() {
        duals[i] = dcd.a[k];
    }
    let mut weights = vec![0.0; prob.dim()];
    for (i, &a) in duals.iter().enumerate() {
        if a != 0.0 {
            let coef = a * prob.targets[i];
            for (w, z) in weights.iter_mut().zip(prob.inputs.row(i)) {
                *w += coef * z;
            }
        }
    }
    let bias = if opts.fit_bias {
        let margins: Vec<f64> = prob.inputs.rows().into_iter().map(|z| dot(&weights, z.as_slice().unwrap_or(&z.to_vec()))).collect();
        optimal_bias(&margins, prob.targets, prob.weights)
    } else {
        0.0
    };
    let model = LinearModel { weights, bias };
    let primal = primal_objective(prob, &model);
    let dual = 2.0 * prob.alpha * (duals.iter().sum::<f64>() - 0.5 * model.norm_sq());
    Ok(SvmSolution { model, duals, primal, dual, iterations, converged })
}

/// `Σ_i v_i max(0, 1 − y_i(w·z_i + b)) + α||w||²`
pub fn primal_objective(prob: &WeightedProblem, model: &LinearModel) -> f64 {
    let mut loss = 0.0;
    for ((z, &y), &v) in prob.inputs.rows().into_iter().zip(prob.targets).zip(prob.weights) {
        if v == 0.0 {
            continue;
        }
        let f = z.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>() + model.bias;
        loss += v * (1.0 - y * f).max(0.0);
    }
    loss + prob.alpha * model.norm_sq()
}

/// `2α (Σ a_i − ½||Σ a_i y_i z_i||²)`, a lower bound on the optimal primal
/// value whenever `0 ≤ a_i ≤ C_i` (and `Σ a_i y_i = 0` when a bias is fitted).
pub fn dual_objective(prob: &WeightedProblem, duals: &[f64]) -> f64 {
    let mut w = vec![0.0; prob.dim()];
    for (i, &a) in duals.iter().enumerate() {
        if a != 0.0 {
            for (wj, z) in w.iter_mut().zip(prob.inputs.row(i)) {
                *wj += a * prob.targets[i] * z;
            }
        }
    }
    2.0 * prob.alpha * (duals.iter().sum::<f64>() - 0.5 * dot(&w, &w))
}

/// Exact minimizer over `b` of `Σ v_i max(0, 1 − y_i (f_i + b))` for fixed
/// margins `f`. On a flat optimal segment the midpoint is returned; with no
/// weighted instances, 0.
pub fn optimal_bias(margins: &[f64], targets: ArrayView1<f64>, weights: ArrayView1<f64>) -> f64 {
    let mut kinks: Vec<(f64, f64)> = Vec::new();
    let mut slope = 0.0;
    let mut total = 0.0;
    for ((&f, &y), &v) in margins.iter().zip(targets).zip(weights) {
        if v <= 0.0 {
            continue;
        }
        total += v;
        if y > 0.0 {
            slope -= v;
            kinks.push((1.0 - f, v));
        } else {
            kinks.push((-1.0 - f, v));
        }
    }
    if kinks.is_empty() {
        return 0.0;
    }
    kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let eps = 1e-12 * total;
    if slope >= -eps {
        return kinks[0].0;
    }
    for (k, &(pos, v)) in kinks.iter().enumerate() {
        slope += v;
        if slope > eps {
            return pos;
        }
        if slope >= -eps {
            return match kinks.get(k + 1) {
                Some(next) => 0.5 * (pos + next.0),
                None => pos,
            };
        }
    }
    kinks[kinks.len() - 1].0
}

/// Dual iterate restricted to the active (positively weighted) instances.
struct DualState {
    y: Vec<f64>,
    v: Vec<f64>,
    c: Vec<f64>,
    alpha: f64,
    /// Active-set Gram matrix, row-major.
    k: Vec<f64>,
    n: usize,
    a: Vec<f64>,
    /// Gradient of `½aᵀQa − Σa`, i.e. `y_i f_i − 1`.
    g: Vec<f64>,
}

impl DualState {
    fn new(prob: &WeightedProblem, gram: ArrayView2<f64>, active: &[usize]) -> Self {
        let n = active.len();
        let mut k = vec![0.0; n * n];
        for (r, &i) in active.iter().enumerate() {
            for (s, &j) in active.iter().enumerate() {
                k[r * n + s] = gram[[i, j]];
            }
        }
        DualState {
            y: active.iter().map(|&i| prob.targets[i]).collect(),
            v: active.iter().map(|&i| prob.weights[i]).collect(),
            c: active.iter().map(|&i| prob.box_bound(i)).collect(),
            alpha: prob.alpha,
            k,
            n,
            a: vec![0.0; n],
            g: vec![-1.0; n],
        }
    }

    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    /// (primal, dual, relative gap) from the maintained gradient.
    fn gap_estimate(&self, fit_bias: bool) -> (f64, f64, f64) {
        let margins: Vec<f64> = (0..self.n).map(|i| self.y[i] * (self.g[i] + 1.0)).collect();
        let w_sq: f64 = (0..self.n).map(|i| self.a[i] * self.y[i] * margins[i]).sum();
        let dual = 2.0 * self.alpha * (self.a.iter().sum::<f64>() - 0.5 * w_sq);
        let b = if fit_bias { optimal_bias(&margins, ArrayView1::from(&self.y), ArrayView1::from(&self.v)) } else { 0.0 };
        let loss: f64 = (0..self.n).map(|i| self.v[i] * (1.0 - self.y[i] * (margins[i] + b)).max(0.0)).sum();
        let primal = loss + self.alpha * w_sq;
        (primal, dual, (primal - dual) / primal.abs().max(1.0))
    }

    fn apply(&mut self, i: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let yi = self.y[i];
        let row = i * self.n;
        for t in 0..self.n {
            self.g[t] += delta * yi * self.y[t] * self.k[row + t];
        }
    }

    /// Dual coordinate descent, no equality constraint.
    fn run_coordinate(&mut self, opts: &SvmOptions) -> (usize, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut order: Vec<usize> = (0..self.n).collect();
        let mut iterations = 0;
        let mut last_dual = f64::NEG_INFINITY;
        loop {
            order.shuffle(&mut rng);
            let mut max_pg: f64 = 0.0;
            for &i in &order {
                let g = self.g[i];
                let pg = if self.a[i] <= 0.0 {
                    g.min(0.0)
                } else if self.a[i] >= self.c[i] {
                    g.max(0.0)
                } else {
                    g
                };
                max_pg = max_pg.max(pg.abs());
                if pg == 0.0 {
                    continue;
                }
                let qii = self.kij(i, i);
                let new = if qii > TAU {
                    (self.a[i] - g / qii).clamp(0.0, self.c[i])
                } else if g < 0.0 {
                    self.c[i]
                } else {
                    0.0
                };
                let delta = new - self.a[i];
                self.a[i] = new;
                self.apply(i, delta);
                iterations += 1;
            }
            let (_, dual, gap) = self.gap_estimate(false);
            debug_assert!(dual >= last_dual - 1e-9 * dual.abs().max(1.0));
            last_dual = dual;
            if gap <= opts.tol || max_pg <= 1e-15 {
                return (iterations, true);
            }
            if iterations >= opts.max_iter {
                return (iterations, false);
            }
        }
    }

    /// SMO with second-order working-set selection.
    fn run_smo(&mut self, opts: &SvmOptions) -> (usize, bool) {
        let mut eps = 1e-2;
        let mut iterations = 0;
        let mut last_dual = f64::NEG_INFINITY;
        loop {
            match self.select_pair(eps) {
                Some((i, j)) => {
                    self.update_pair(i, j);
                    iterations += 1;
                    if iterations >= opts.max_iter {
                        let (_, _, gap) = self.gap_estimate(true);
                        return (iterations, gap <= opts.tol);
                    }
                }
                None => {
                    let (_, dual, gap) = self.gap_estimate(true);
                    debug_assert!(dual >= last_dual - 1e-9 * dual.abs().max(1.0));
                    last_dual = dual;
                    if gap <= opts.tol {
                        return (iterations, true);
                    }
                    eps *= 0.1;
                    if eps < 1e-15 {
                        return (iterations, false);
                    }
                }
            }
        }
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.a[t] < self.c[t]
        } else {
            self.a[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.a[t] > 0.0
        } else {
            self.a[t] < self.c[t]
        }
    }

    fn select_pair(&self, eps: f64) -> Option<(usize, usize)> {
        let mut gmax = f64::NEG_INFINITY;
        let mut best_i = None;
        for t in 0..self.n {
            if self.in_up(t) {
                let score = -self.y[t] * self.g[t];
                if score >= gmax {
                    gmax = score;
                    best_i = Some(t);
                }
            }
        }
        let i = best_i?;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..self.n {
            if !self.in_low(t) {
                continue;
            }
            let score = self.y[t] * self.g[t];
            if score >= gmax2 {
                gmax2 = score;
            }
            let grad_diff = gmax + score;
            if grad_diff > 0.0 {
                let quad = self.kij(i, i) + self.kij(t, t) - 2.0 * self.kij(i, t);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    best_j = Some(t);
                }
            }
        }
        if gmax + gmax2 < eps {
            return None;
        }
        best_j.map(|j| (i, j))
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let (ci, cj) = (self.c[i], self.c[j]);
        let (old_ai, old_aj) = (self.a[i], self.a[j]);
        let mut quad = self.kij(i, i) + self.kij(j, j) - 2.0 * self.kij(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_ai, old_aj);
        if self.y[i] != self.y[j] {
            let delta = (-self.g[i] - self.g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (self.g[i] - self.g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.a[i] = ai;
        self.a[j] = aj;
        self.apply(i, ai - old_ai);
        self.apply(j, aj - old_aj);
    }
}

//! Alternating minimization of the self-paced multi-label objective
//!
//! ```text
//! Σ_il v_il·hinge(y_il (w_l·[x_i; q_i] + b_l)) + α Σ_l ||w_l||²
//!     + β Σ_ij q_ji ||y_i − a_j||² + Σ_il f(v_il, λ)
//! ```
//!
//! over per-label classifiers `W`, codes `Q` (columns on the simplex),
//! cluster centers `A` and self-paced weights `V`. Each sweep updates the
//! blocks in the order V, W, Q, A at a fixed pace `λ`, then grows the pace.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{init_a, init_q, kmeans};
use crate::error::{Error, Result};
use crate::lpsolve::{objective_q, solve_q, LpOptions, QSubproblem};
use crate::selfpace::{PaceParams, SchemeKind};
use crate::wsvm::{gram_matrix, primal_objective, train_with_gram, LinearModel, SvmOptions, WeightedProblem};

/// Which objective the trainer optimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Self-paced weights with the pace schedule.
    #[default]
    Full,
    /// All weights pinned to 1, no self-paced term and no pace schedule.
    #[serde(rename = "mllocc_equivalent", alias = "mlloc_equivalent")]
    MllocEquivalent,
    /// No code block and unit weights: one SVM per label on the raw features.
    IndependentBinary,
}

impl BaselineMode {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMode::Full => "full",
            BaselineMode::MllocEquivalent => "mllocc_equivalent",
            BaselineMode::IndependentBinary => "independent_binary",
        }
    }
}

/// Cluster-center update rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterUpdate {
    /// `a_j = Σ_i q_ji y_i / Σ_i q_ji`, the exact minimizer.
    #[default]
    Normalized,
    /// `a_j = Σ_i q_ji y_i`.
    Unnormalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Number of label clusters (code length).
    pub m: usize,
    pub scheme: SchemeKind,
    pub lambda0: f64,
    pub mu: f64,
    pub max_outer: usize,
    /// Relative objective change below which a sweep counts as converged.
    pub tol: f64,
    pub seed: u64,
    /// Relative duality gap for each per-label SVM.
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub lp_tol: f64,
    pub standardize: bool,
    pub baseline_mode: BaselineMode,
    pub center_update: CenterUpdate,
    /// Ridge penalty of the test-time code regressors.
    pub code_ridge: f64,
    pub fit_bias: bool,
    pub kmeans_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            beta: 1.0,
            m: 5,
            scheme: SchemeKind::Sigmoid,
            lambda0: 1e-3,
            mu: 1.2,
            max_outer: 50,
            tol: 1e-4,
            seed: 0,
            svm_tol: 1e-6,
            svm_max_iter: 5_000_000,
            lp_tol: 1e-10,
            standardize: true,
            baseline_mode: BaselineMode::Full,
            center_update: CenterUpdate::Normalized,
            code_ridge: 1e-3,
            fit_bias: true,
            kmeans_max_iter: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("tol", self.tol)?;
        positive("svm_tol", self.svm_tol)?;
        positive("lp_tol", self.lp_tol)?;
        PaceParams::new(self.lambda0, self.mu)?;
        if self.code_ridge.is_nan() || self.code_ridge < 0.0 {
            return Err(Error::InvalidInput(format!("code_ridge must be nonnegative, got {}", self.code_ridge)));
        }
        if self.m == 0 && self.baseline_mode != BaselineMode::IndependentBinary {
            return Err(Error::InvalidInput("m must be at least 1".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidInput("max_outer must be at least 1".into()));
        }
        Ok(())
    }

    /// Code length actually used (0 without a code block).
    pub fn code_len(&self) -> usize {
        match self.baseline_mode {
            BaselineMode::IndependentBinary => 0,
            _ => self.m,
        }
    }

    fn self_paced(&self) -> bool {
        self.baseline_mode == BaselineMode::Full
    }

    fn svm_options(&self, label: usize) -> SvmOptions {
        SvmOptions { tol: self.svm_tol, max_iter: self.svm_max_iter, fit_bias: self.fit_bias, seed: self.seed.wrapping_add(label as u64) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// One classifier per label over `[x; q]` (length `d + m`).
    pub models: Vec<LinearModel>,
    /// `m × n`, columns on the simplex.
    pub codes: Array2<f64>,
    /// `L × m`
    pub centers: Array2<f64>,
    /// `n × L`, entries in `[0, 1]`.
    pub weights: Array2<f64>,
    pub lambda: f64,
    pub iteration: usize,
}

impl ModelState {
    pub fn n_labels(&self) -> usize {
        self.models.len()
    }

    pub fn code_len(&self) -> usize {
        self.codes.nrows()
    }

    /// Classifier weights as a `(d + m) × L` matrix.
    pub fn weight_matrix(&self) -> Array2<f64> {
        let p = self.models.first().map_or(0, |m| m.weights.len());
        Array2::from_shape_fn((p, self.models.len()), |(k, l)| self.models[l].weights[k])
    }

    pub fn biases(&self) -> Array1<f64> {
        self.models.iter().map(|m| m.bias).collect()
    }
}

/// The four terms of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub weighted_loss: f64,
    pub weight_norm: f64,
    pub code_fit: f64,
    pub self_paced: f64,
    pub total: f64,
}

/// Objective values around one sweep, all at the sweep's pace `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: f64,
    pub start: f64,
    pub after_v: f64,
    pub after_w: f64,
    pub after_q: f64,
    pub after_a: f64,
    /// `|start − after_a| / max(1, |start|)`
    pub relative_change: f64,
}

impl SweepRecord {
    /// Objective before and after each block update, in order.
    pub fn steps(&self) -> [(f64, f64); 4] {
        [(self.start, self.after_v), (self.after_v, self.after_w), (self.after_w, self.after_q), (self.after_q, self.after_a)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub state: ModelState,
    pub history: Vec<SweepRecord>,
    pub converged: bool,
}

/// Weights this close to 1 everywhere stop the pace from growing.
const SATURATED: f64 = 1.0 - 1e-6;
/// Clusters with less code mass keep their previous center.
const MIN_MASS: f64 = 1e-12;
const ARCTAN_CLAMP: f64 = 1e-12;

/// Training data (already scaled) plus configuration.
pub struct Trainer {
    features: Array2<f64>,
    labels: Array2<f64>,
    feature_gram: Array2<f64>,
    cfg: TrainConfig,
}

impl Trainer {
    /// `features` is `n × d`, `labels` is `n × L` over `{−1, +1}`.
    pub fn new(features: Array2<f64>, labels: Array2<f64>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let n = features.nrows();
        if labels.nrows() != n {
            return Err(Error::Dimension(format!("{n} feature rows but {} label rows", labels.nrows())));
        }
        if n == 0 {
            return Err(Error::InvalidInput("no training instances".into()));
        }
        if cfg.code_len() > n {
            return Err(Error::InvalidInput(format!("cannot form {} clusters from {n} instances", cfg.code_len())));
        }
        let feature_gram = gram_matrix(features.view());
        Ok(Trainer { features, labels, feature_gram, cfg })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Clusters the label vectors for `Q` and `A`, fits unit-weight SVMs for
    /// `W`, then sets `V` by one weight update at `λ₀`.
    pub fn initialize(&self) -> Result<ModelState> {
        let (n, l) = self.labels.dim();
        let m = self.cfg.code_len();
        let (codes, centers) = if m > 0 {
            let c = kmeans(&self.labels, m, self.cfg.seed, self.cfg.kmeans_max_iter)?;
            (init_q(&c), init_a(&c))
        } else {
            (Array2::zeros((0, n)), Array2::zeros((l, 0)))
        };
        let p = self.features.ncols() + m;
        let mut state = ModelState {
            models: vec![LinearModel::zeros(p); l],
            codes,
            centers,
            weights: Array2::ones((n, l)),
            lambda: self.cfg.lambda0,
            iteration: 0,
        };
        self.update_w(&mut state)?;
        self.update_v(&mut state)?;
        Ok(state)
    }

    fn augmented(&self, codes: &Array2<f64>) -> Array2<f64> {
        concatenate![Axis(1), self.features, codes.t()]
    }

    /// `n × L` decision values `w_l·[x_i; q_i] + b_l`.
    pub fn margins(&self, state: &ModelState) -> Array2<f64> {
        let z = self.augmented(&state.codes);
        z.dot(&state.weight_matrix()) + &state.biases()
    }

    /// `n × L` hinge losses at the current classifiers and codes.
    pub fn losses(&self, state: &ModelState) -> Array2<f64> {
        let f = self.margins(state);
        ndarray::Zip::from(&f).and(&self.labels).map_collect(|&f, &y| (1.0 - y * f).max(0.0))
    }

    /// `n × m` squared distances `||y_i − a_j||²`.
    fn center_dists(&self, centers: &Array2<f64>) -> Array2<f64> {
        let (n, m) = (self.n_instances(), centers.ncols());
        Array2::from_shape_fn((n, m), |(i, j)| self.labels.row(i).iter().zip(centers.column(j)).map(|(y, a)| (y - a) * (y - a)).sum())
    }

    pub fn objective(&self, state: &ModelState) -> Result<Objective> {
        let losses = self.losses(state);
        let weighted_loss = (&losses * &state.weights).sum();
        let weight_norm = self.cfg.alpha * state.models.iter().map(LinearModel::norm_sq).sum::<f64>();
        let code_fit =
            if state.code_len() > 0 { self.cfg.beta * (&self.center_dists(&state.centers) * &state.codes.t()).sum() } else { 0.0 };
        let self_paced = if self.cfg.self_paced() {
            let scheme = self.cfg.scheme;
            let mut total = 0.0;
            for &v in &state.weights {
                let v = if scheme == SchemeKind::Arctan { v.clamp(ARCTAN_CLAMP, 1.0 - ARCTAN_CLAMP) } else { v };
                total += scheme.regularizer(v, state.lambda)?;
            }
            total
        } else {
            0.0
        };
        let total = weighted_loss + weight_norm + code_fit + self_paced;
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("objective at sweep {}", state.iteration)));
        }
        Ok(Objective { weighted_loss, weight_norm, code_fit, self_paced, total })
    }

    /// Sets every weight to its closed-form minimizer at the current pace
    /// (or to 1 outside the self-paced mode).
    pub fn update_v(&self, state: &mut ModelState) -> Result<()> {
        if !self.cfg.self_paced() {
            state.weights.fill(1.0);
            return Ok(());
        }
        let losses = self.losses(state);
        let scheme = self.cfg.scheme;
        let lambda = state.lambda;
        let mut weights = Array2::zeros(losses.dim());
        for (v, &l) in weights.iter_mut().zip(&losses) {
            *v = scheme.weight(l, lambda)?;
        }
        state.weights = weights;
        Ok(())
    }

    /// Retrains every label's classifier on its weight column. A new
    /// classifier replaces the old one only if it does not raise that
    /// label's objective.
    pub fn update_w(&self, state: &mut ModelState) -> Result<()> {
        let z = self.augmented(&state.codes);
        let gram = if state.code_len() > 0 { &self.feature_gram + &state.codes.t().dot(&state.codes) } else { self.feature_gram.clone() };
        let updated: Vec<LinearModel> = (0..self.n_labels())
            .into_par_iter()
            .map(|l| {
                let prob = WeightedProblem::new(z.view(), self.labels.column(l), state.weights.column(l), self.cfg.alpha)?;
                let sol = train_with_gram(&prob, gram.view(), &self.cfg.svm_options(l))?;
                let old = &state.models[l];
                if old.weights.len() == prob.dim() && primal_objective(&prob, old) < sol.primal {
                    Ok(old.clone())
                } else {
                    Ok(sol.model)
                }
            })
            .collect::<Result<_>>()?;
        state.models = updated;
        Ok(())
    }

    fn q_subproblem(&self, state: &ModelState, feature_scores: ArrayView2<f64>, dists: &Array2<f64>, i: usize) -> QSubproblem {
        let d = self.features.ncols();
        QSubproblem {
            feature_scores: feature_scores.row(i).to_vec(),
            code_weights: state.models.iter().map(|m| m.weights[d..].to_vec()).collect(),
            targets: self.labels.row(i).to_vec(),
            sp_weights: state.weights.row(i).to_vec(),
            center_dists: dists.row(i).to_vec(),
            beta: self.cfg.beta,
        }
    }

    /// Re-solves every instance's code; the old code is kept when it is at
    /// least as good.
    pub fn update_q(&self, state: &mut ModelState) -> Result<()> {
        let m = state.code_len();
        if m == 0 {
            return Ok(());
        }
        let d = self.features.ncols();
        let wx = state.weight_matrix().slice(s![..d, ..]).to_owned();
        let feature_scores = self.features.dot(&wx) + &state.biases();
        let dists = self.center_dists(&state.centers);
        let lp = LpOptions { tol: self.cfg.lp_tol, ..Default::default() };
        let columns: Vec<Vec<f64>> = (0..self.n_instances())
            .into_par_iter()
            .map(|i| {
                let sub = self.q_subproblem(state, feature_scores.view(), &dists, i);
                let old = state.codes.column(i).to_vec();
                let new = solve_q(&sub, &lp)?;
                if objective_q(&sub, &old)? < objective_q(&sub, &new)? {
                    Ok(old)
                } else {
                    Ok(new)
                }
            })
            .collect::<Result<_>>()?;
        for (i, col) in columns.into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                state.codes[[j, i]] = v;
            }
        }
        Ok(())
    }

    pub fn update_a(&self, state: &mut ModelState) {
        for j in 0..state.code_len() {
            let q = state.codes.row(j);
            let mass = q.sum();
            let weighted = q.dot(&self.labels);
            match self.cfg.center_update {
                CenterUpdate::Normalized if mass >= MIN_MASS => {
                    state.centers.column_mut(j).assign(&(weighted / mass));
                }
                CenterUpdate::Normalized => {}
                CenterUpdate::Unnormalized => state.centers.column_mut(j).assign(&weighted),
            }
        }
    }

    /// One pass of V, W, Q, A updates at the current pace, followed by the
    /// pace update.
    pub fn sweep(&self, state: &mut ModelState) -> Result<SweepRecord> {
        let lambda = state.lambda;
        let start = self.objective(state)?.total;
        self.update_v(state)?;
        let after_v = self.objective(state)?.total;
        self.update_w(state)?;
        let after_w = self.objective(state)?.total;
        self.update_q(state)?;
        let after_q = self.objective(state)?.total;
        self.update_a(state);
        let after_a = self.objective(state)?.total;
        if self.cfg.self_paced() && state.weights.iter().any(|&v| v <= SATURATED) {
            state.lambda *= self.cfg.mu;
        }
        state.iteration += 1;
        log::debug!("sweep {}: λ = {lambda:.3e}, objective {start:.6} → {after_a:.6}", state.iteration);
        Ok(SweepRecord {
            lambda,
            start,
            after_v,
            after_w,
            after_q,
            after_a,
            relative_change: (start - after_a).abs() / start.abs().max(1.0),
        })
    }

    /// Sweeps until the fixed-pace relative change stays below `tol` for two
    /// consecutive sweeps, or `max_outer` sweeps have run.
    pub fn fit(&self) -> Result<FitOutcome> {
        let mut state = self.initialize()?;
        let mut history = Vec::new();
        let mut converged = false;
        if self.cfg.baseline_mode == BaselineMode::IndependentBinary {
            return Ok(FitOutcome { state, history, converged: true });
        }
        let mut calm = 0;
        for _ in 0..self.cfg.max_outer {
            let rec = self.sweep(&mut state)?;
            history.push(rec);
            calm = if rec.relative_change < self.cfg.tol { calm + 1 } else { 0 };
            if calm >= 2 {
                converged = true;
                break;
            }
        }
        Ok(FitOutcome { state, history, converged })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, d: usize, l: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let dirs = Array2::from_shape_fn((d, l), |_| rng.random_range(-1.0..1.0));
        let mut y = x.dot(&dirs).mapv(|v| if v + rng.random_range(-0.3..0.3) > 0.0 { 1.0 } else { -1.0 });
        // make sure every label has both classes
        for l in 0..l {
            y[[0, l]] = 1.0;
            y[[1, l]] = -1.0;
        }
        (x, y)
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { m: 2, svm_tol: 1e-9, ..Default::default() }
    }

    #[test]
    fn initialization() {
        let (x, y) = toy(12, 3, 2, 0);
        let t = Trainer::new(x, y, small_cfg()).unwrap();
        let s = t.initialize().unwrap();
        for col in s.codes.columns() {
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(col.sum(), 1.0);
        }
        let losses = t.losses(&s);
        for (v, l) in s.weights.iter().zip(&losses) {
            assert_eq!(*v, SchemeKind::Sigmoid.weight(*l, 1e-3).unwrap());
        }
        assert_eq!(s.models[0].weights.len(), 5);

        let (x, y) = toy(12, 3, 2, 0);
        let huge = Trainer::new(x, y, TrainConfig { lambda0: 1e12, ..small_cfg() }).unwrap();
        let s = huge.initialize().unwrap();
        assert!(s.weights.iter().all(|&v| v > 1.0 - 1e-9));
    }

    #[test]
    fn zero_weight_column_gives_zero_classifier() {
        let (x, y) = toy(10, 3, 2, 1);
        let t = Trainer::new(x, y, small_cfg()).unwrap();
        let mut s = t.initialize().unwrap();
        s.weights.column_mut(1).fill(0.0);
        s.models[1] = LinearModel::zeros(5);
        t.update_w(&mut s).unwrap();
        assert_eq!(s.models[1], LinearModel::zeros(5));
    }

    #[test]
    fn sigmoid_zero_loss_gets_full_weight() {
        let (x, y) = toy(10, 3, 2, 2);
        let t = Trainer::new(x, y, small_cfg()).unwrap();
        let mut s = t.initialize().unwrap();
        let losses = t.losses(&s);
        t.update_v(&mut s).unwrap();
        for (v, l) in s.weights.iter().zip(&losses) {
            if *l == 0.0 {
                assert_eq!(*v, 1.0);
            }
            if *l > 1.0 {
                assert!(*v < 1e-100);
            }
        }
    }

    #[test]
    fn objective_at_zero_model() {
        let (x, y) = toy(8, 2, 3, 3);
        let t = Trainer::new(x, y, small_cfg()).unwrap();
        let mut s = t.initialize().unwrap();
        for m in &mut s.models {
            *m = LinearModel::zeros(4);
        }
        s.weights.fill(1.0);
        let obj = t.objective(&s).unwrap();
        assert_abs_diff_eq!(obj.weighted_loss, 24.0);
        assert_eq!(obj.weight_norm, 0.0);
        assert_eq!(obj.self_paced, 0.0);
        let dists = t.center_dists(&s.centers);
        assert_abs_diff_eq!(obj.code_fit, (&dists * &s.codes.t()).sum(), epsilon = 1e-12);
        assert_abs_diff_eq!(obj.total, 24.0 + obj.code_fit, epsilon = 1e-12);
    }

    #[test]
    fn baseline_objective_drops_self_paced_term() {
        let (x, y) = toy(10, 3, 2, 4);
        let full = Trainer::new(x.clone(), y.clone(), small_cfg()).unwrap();
        let base = Trainer::new(x, y, TrainConfig { baseline_mode: BaselineMode::MllocEquivalent, ..small_cfg() }).unwrap();
        let mut s = full.initialize().unwrap();
        s.weights.fill(1.0);
        let a = full.objective(&s).unwrap();
        let b = base.objective(&s).unwrap();
        assert_abs_diff_eq!(a.total - a.self_paced, b.total, epsilon = 1e-12);
    }

    #[test]
    fn center_updates() {
        let (x, y) = toy(10, 3, 2, 5);
        let t = Trainer::new(x, y.clone(), small_cfg()).unwrap();
        let mut s = t.initialize().unwrap();
        s.codes.fill(0.5);
        t.update_a(&mut s);
        let mean = y.mean_axis(Axis(0)).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_abs_diff_eq!(s.centers[[k, j]], mean[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weights_grow_with_pace_alone() {
        let (x, y) = toy(15, 3, 3, 6);
        let t = Trainer::new(x, y, small_cfg()).unwrap();
        let mut s = t.initialize().unwrap();
        let before = s.weights.clone();
        s.lambda *= 1.2;
        t.update_v(&mut s).unwrap();
        for (a, b) in before.iter().zip(&s.weights) {
            assert!(b >= a);
        }
    }

    #[test]
    fn permuting_labels_permutes_classifiers() {
        let (x, y) = toy(14, 3, 3, 7);
        let t = Trainer::new(x.clone(), y.clone(), small_cfg()).unwrap();
        let mut s = t.initialize().unwrap();
        let perm = [2, 0, 1];
        let yp = y.select(Axis(1), &perm);
        let tp = Trainer::new(x, yp, small_cfg()).unwrap();
        let mut sp = s.clone();
        sp.weights = s.weights.select(Axis(1), &perm);
        sp.models = perm.iter().map(|&k| s.models[k].clone()).collect();
        t.update_w(&mut s).unwrap();
        tp.update_w(&mut sp).unwrap();
        for (k, &src) in perm.iter().enumerate() {
            assert_eq!(sp.models[k], s.models[src]);
        }
    }

    #[test]
    fn sweeps_are_monotone_at_fixed_pace() {
        for scheme in SchemeKind::ALL {
            let (x, y) = toy(30, 4, 3, 8);
            let t = Trainer::new(x, y, TrainConfig { scheme, lambda0: 0.5, ..small_cfg() }).unwrap();
            let mut s = t.initialize().unwrap();
            for _ in 0..5 {
                let rec = t.sweep(&mut s).unwrap();
                for (before, after) in rec.steps() {
                    assert!(after <= before + 1e-6 * before.abs().max(1.0), "{scheme}: {before} -> {after}");
                }
                for col in s.codes.columns() {
                    assert!((col.sum() - 1.0).abs() <= 1e-9);
                    assert!(col.iter().all(|&q| q >= -1e-12));
                }
                assert!(s.weights.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn toy_run_converges() {
        let (x, y) = toy(8, 3, 2, 9);
        let t = Trainer::new(x, y, small_cfg()).unwrap();
        let out = t.fit().unwrap();
        assert!(out.history.len() <= 50);
        assert!(out.history.iter().all(|r| r.after_a.is_finite()));
        let again = t.fit().unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn independent_binary_has_no_codes() {
        let (x, y) = toy(12, 3, 2, 10);
        let t = Trainer::new(x, y, TrainConfig { baseline_mode: BaselineMode::IndependentBinary, ..small_cfg() }).unwrap();
        let out = t.fit().unwrap();
        assert_eq!(out.state.code_len(), 0);
        assert_eq!(out.state.models[0].weights.len(), 3);
        assert!(out.state.weights.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn huge_beta_snaps_codes_to_nearest_center() {
        let (x, y) = toy(12, 3, 3, 11);
        let t = Trainer::new(x, y, TrainConfig { beta: 1e9, m: 3, ..small_cfg() }).unwrap();
        let mut s = t.initialize().unwrap();
        t.update_q(&mut s).unwrap();
        let dists = t.center_dists(&s.centers);
        for i in 0..12 {
            let row = dists.row(i);
            let best = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let unique = row.iter().filter(|&&d| d == best).count() == 1;
            if unique {
                let j = row.iter().position(|&d| d == best).unwrap();
                assert_abs_diff_eq!(s.codes[[j, i]], 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { mu: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { m: 0, ..Default::default() }.validate().is_err());
        let cfg: TrainConfig = serde_json::from_str(r#"{"scheme": "tanh", "baseline_mode": "mllocc_equivalent"}"#).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::Tanh);
        assert_eq!(cfg.baseline_mode, BaselineMode::MllocEquivalent);
        assert_eq!(cfg.alpha, 0.5);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"schema": "tanh"}"#).is_err());
    }
}

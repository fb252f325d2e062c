//! Dense linear programming and the per-instance code subproblem.
//!
//! The code update minimizes a sum of weighted hinges plus a linear
//! distance penalty over the probability simplex. Each hinge is replaced by
//! a slack variable bounded below by zero and by the hinge argument, which
//! turns the problem into a small LP solved exactly by a two-phase tableau
//! simplex with Bland's rule.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `min c·x  s.t.  G x ≤ h,  E x = e,  x ≥ lower`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardLP {
    pub objective: Vec<f64>,
    pub ineq_matrix: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
}

impl StandardLP {
    /// An LP over `n` variables with lower bounds 0 and no constraints.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        StandardLP { objective, lower: vec![0.0; n], ..Default::default() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_matrix.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.lower.len() != n {
            return Err(Error::Dimension(format!("{} lower bounds for {n} variables", self.lower.len())));
        }
        if self.ineq_matrix.len() != self.ineq_rhs.len() || self.eq_matrix.len() != self.eq_rhs.len() {
            return Err(Error::Dimension("constraint rows and right-hand sides differ in count".into()));
        }
        for row in self.ineq_matrix.iter().chain(&self.eq_matrix) {
            if row.len() != n {
                return Err(Error::Dimension(format!("constraint row of length {} for {n} variables", row.len())));
            }
        }
        let all = self
            .objective
            .iter()
            .chain(&self.lower)
            .chain(&self.ineq_rhs)
            .chain(&self.eq_rhs)
            .chain(self.ineq_matrix.iter().flatten())
            .chain(self.eq_matrix.iter().flatten());
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("LP data".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    /// Reduced-cost and pivot-size threshold.
    pub tol: f64,
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { tol: 1e-10, max_pivots: 50_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// `c·x` evaluated at `x`.
    pub objective: f64,
    pub pivots: usize,
}

/// Smallest column entry accepted as a pivot.
const PIVOT_TOL: f64 = 1e-9;
/// Pivots between rebuilds of the tableau from the original data.
const REFRESH_EVERY: usize = 25;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    cost_rhs: f64,
    /// Original constraint rows (with slack and artificial columns).
    orig: Vec<Vec<f64>>,
    orig_rhs: Vec<f64>,
    /// Costs of the current phase, per column.
    phase_cost: Vec<f64>,
    tol: f64,
    pivots: usize,
    since_refresh: usize,
    max_pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
                self.rhs[k] -= f * pivot_rhs;
                if self.rhs[k] < 0.0 && self.rhs[k] > -self.tol {
                    self.rhs[k] = 0.0;
                }
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[col] = 0.0;
            self.cost_rhs -= f * pivot_rhs;
        }
        self.basis[r] = col;
        self.pivots += 1;
        self.since_refresh += 1;
    }

    /// Recomputes the tableau for the current basis from the original
    /// rows, discarding accumulated round-off. Returns false (leaving the
    /// tableau untouched) if the basis matrix is numerically singular.
    fn refresh(&mut self) -> bool {
        let m = self.rows.len();
        let ncol = self.phase_cost.len();
        if m == 0 {
            self.cost = self.phase_cost.clone();
            self.cost_rhs = 0.0;
            self.since_refresh = 0;
            return true;
        }
        let basis_matrix = DMatrix::from_fn(m, m, |i, k| self.orig[i][self.basis[k]]);
        let lu = basis_matrix.clone().lu();
        let dual_lu = basis_matrix.transpose().lu();
        let full = DMatrix::from_fn(m, ncol, |i, j| self.orig[i][j]);
        let b = DVector::from_column_slice(&self.orig_rhs);
        let basic_cost = DVector::from_fn(m, |k, _| self.phase_cost[self.basis[k]]);
        let (Some(body), Some(rhs), Some(duals)) = (lu.solve(&full), lu.solve(&b), dual_lu.solve(&basic_cost)) else {
            return false;
        };
        if body.iter().chain(rhs.iter()).chain(duals.iter()).any(|v| !v.is_finite()) {
            return false;
        }
        let scale = 1.0 + self.orig_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..m {
            for j in 0..ncol {
                self.rows[i][j] = body[(i, j)];
            }
            for (k, &bk) in self.basis.iter().enumerate() {
                self.rows[i][bk] = if i == k { 1.0 } else { 0.0 };
            }
            self.rhs[i] = if rhs[i] < 0.0 && rhs[i] > -PIVOT_TOL * scale { 0.0 } else { rhs[i] };
        }
        for j in 0..ncol {
            self.cost[j] = self.phase_cost[j] - (0..m).map(|i| duals[i] * self.orig[i][j]).sum::<f64>();
        }
        for &bk in &self.basis {
            self.cost[bk] = 0.0;
        }
        self.cost_rhs = -(0..m).map(|k| basic_cost[k] * self.rhs[k]).sum::<f64>();
        self.since_refresh = 0;
        true
    }

    /// Primal simplex over the first `eligible` columns. A verdict
    /// (optimal or unbounded) is only accepted on a freshly rebuilt tableau.
    fn run(&mut self, eligible: usize) -> Result<()> {
        let cost_tol = self.tol * (1.0 + self.phase_cost.iter().fold(0.0f64, |a, c| a.max(c.abs())));
        loop {
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh();
            }
            let entering = (0..eligible).find(|&j| self.cost[j] < -cost_tol);
            let leave = entering.and_then(|col| self.leaving_row(col));
            if entering.is_none() || leave.is_none() {
                if self.since_refresh > 0 && self.refresh() {
                    continue;
                }
                return match entering {
                    None => Ok(()),
                    Some(_) => Err(Error::Unbounded),
                };
            }
            if self.pivots >= self.max_pivots {
                return Err(Error::IterationLimit(format!("simplex exceeded {} pivots", self.max_pivots)));
            }
            self.pivot(leave.expect("checked above"), entering.expect("checked above"));
        }
    }

    /// Minimum-ratio row; ties go to the lowest basic column index.
    fn leaving_row(&self, col: usize) -> Option<usize> {
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][col];
            if a <= PIVOT_TOL.max(self.tol) {
                continue;
            }
            let ratio = self.rhs[r].max(0.0) / a;
            leave = match leave {
                None => Some((r, ratio)),
                Some((br, best)) => {
                    let slack = 1e-12 * (1.0 + best.abs());
                    if ratio < best - slack || (ratio <= best + slack && self.basis[r] < self.basis[br]) {
                        Some((r, ratio))
                    } else {
                        Some((br, best))
                    }
                }
            };
        }
        leave.map(|(r, _)| r)
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule.
pub fn solve_lp(lp: &StandardLP, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.n_vars();
    let n_ineq = lp.ineq_matrix.len();
    let n_rows = n_ineq + lp.eq_matrix.len();

    // shift x = y + lower so that y ≥ 0
    let shifted = |row: &[f64], rhs: f64| rhs - row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum::<f64>();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_rows);
    let mut rhs = Vec::with_capacity(n_rows);
    let mut needs_artificial = Vec::with_capacity(n_rows);
    for (k, (row, &b)) in lp.ineq_matrix.iter().zip(&lp.ineq_rhs).enumerate() {
        let mut full = vec![0.0; n + n_ineq];
        full[..n].copy_from_slice(row);
        full[n + k] = 1.0;
        let b = shifted(row, b);
        if b < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
        }
        rows.push(full);
        rhs.push(b.abs());
        needs_artificial.push(b < 0.0);
    }
    for (row, &b) in lp.eq_matrix.iter().zip(&lp.eq_rhs) {
        let mut full = vec![0.0; n + n_ineq];
        full[..n].copy_from_slice(row);
        let b = shifted(row, b);
        if b < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
        }
        rows.push(full);
        rhs.push(b.abs());
        needs_artificial.push(true);
    }

    let n_struct = n + n_ineq;
    let n_art = needs_artificial.iter().filter(|&&a| a).count();
    let mut basis = Vec::with_capacity(n_rows);
    let mut next_art = n_struct;
    for (k, row) in rows.iter_mut().enumerate() {
        row.resize(n_struct + n_art, 0.0);
        if needs_artificial[k] {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(n + k);
        }
    }

    let mut phase_cost = vec![0.0; n_struct + n_art];
    phase_cost[n_struct..].iter_mut().for_each(|c| *c = 1.0);
    let scale = 1.0 + rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let mut t = Tableau {
        orig: rows.clone(),
        orig_rhs: rhs.clone(),
        rows,
        rhs,
        basis,
        cost: vec![0.0; n_struct + n_art],
        cost_rhs: 0.0,
        phase_cost,
        tol: opts.tol,
        pivots: 0,
        since_refresh: 0,
        max_pivots: opts.max_pivots,
    };

    if n_art > 0 {
        t.refresh();
        t.run(n_struct + n_art)?;
        if -t.cost_rhs > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        // drive remaining artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] < n_struct {
                r += 1;
                continue;
            }
            match (0..n_struct).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                Some(j) => {
                    t.pivot(r, j);
                    r += 1;
                }
                None => {
                    t.rows.remove(r);
                    t.rhs.remove(r);
                    t.basis.remove(r);
                    t.orig.remove(r);
                    t.orig_rhs.remove(r);
                }
            }
        }
    }

    t.phase_cost = vec![0.0; n_struct + n_art];
    t.phase_cost[..n].copy_from_slice(&lp.objective);
    if !t.refresh() {
        return Err(Error::Singular("simplex basis became singular".into()));
    }
    t.run(n_struct)?;

    let mut x = lp.lower.clone();
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] += t.rhs[r].max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution { x, objective, pivots: t.pivots })
}

/// One instance's code subproblem. Label `l`'s margin at code `q` is
/// `feature_scores[l] + code_weights[l]·q`, where `feature_scores` already
/// includes the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSubproblem {
    pub feature_scores: Vec<f64>,
    /// `L` rows of length `m`.
    pub code_weights: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub sp_weights: Vec<f64>,
    pub center_dists: Vec<f64>,
    pub beta: f64,
}

impl QSubproblem {
    pub fn n_labels(&self) -> usize {
        self.targets.len()
    }

    pub fn n_codes(&self) -> usize {
        self.center_dists.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (l, m) = (self.n_labels(), self.n_codes());
        if m == 0 {
            return Err(Error::InvalidInput("code subproblem needs at least one cluster".into()));
        }
        if self.feature_scores.len() != l || self.sp_weights.len() != l || self.code_weights.len() != l {
            return Err(Error::Dimension(format!(
                "{l} targets, {} scores, {} weights, {} code rows",
                self.feature_scores.len(),
                self.sp_weights.len(),
                self.code_weights.len()
            )));
        }
        if self.code_weights.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("code weight rows must have length {m}")));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {}", self.beta)));
        }
        if self.center_dists.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Domain("center distances must be finite and nonnegative".into()));
        }
        if self.sp_weights.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("self-paced weights must lie in [0, 1]".into()));
        }
        if self.targets.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidInput("targets must be -1 or +1".into()));
        }
        if self.feature_scores.iter().chain(self.code_weights.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("code subproblem scores".into()));
        }
        Ok(())
    }

    fn margin(&self, l: usize, q: &[f64]) -> f64 {
        self.feature_scores[l] + self.code_weights[l].iter().zip(q).map(|(w, q)| w * q).sum::<f64>()
    }
}

/// `Σ_l v_l max(0, 1 − y_l margin_l(q)) + β Σ_j d_j q_j`; `q` must lie on the
/// simplex to within `1e-8`.
pub fn objective_q(sub: &QSubproblem, q: &[f64]) -> Result<f64> {
    sub.validate()?;
    if q.len() != sub.n_codes() {
        return Err(Error::Dimension(format!("code of length {} for {} clusters", q.len(), sub.n_codes())));
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-8 || q.iter().any(|&x| x < -1e-8) {
        return Err(Error::Domain(format!("code is off the simplex (sum {sum})")));
    }
    let hinge: f64 = (0..sub.n_labels())
        .filter(|&l| sub.sp_weights[l] > 0.0)
        .map(|l| sub.sp_weights[l] * (1.0 - sub.targets[l] * sub.margin(l, q)).max(0.0))
        .sum();
    let dist: f64 = sub.center_dists.iter().zip(q).map(|(d, q)| d * q).sum();
    Ok(hinge + sub.beta * dist)
}

/// Exact minimizer of [`objective_q`] over the simplex.
pub fn solve_q(sub: &QSubproblem, opts: &LpOptions) -> Result<Vec<f64>> {
    sub.validate()?;
    let m = sub.n_codes();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let active: Vec<usize> = (0..sub.n_labels()).filter(|&l| sub.sp_weights[l] > 0.0).collect();
    if active.is_empty() {
        let mut best = 0;
        for j in 1..m {
            if sub.center_dists[j] < sub.center_dists[best] {
                best = j;
            }
        }
        let mut q = vec![0.0; m];
        q[best] = 1.0;
        return Ok(q);
    }

    // variables: q_1..q_m, then one slack per active label
    let k = active.len();
    let mut c: Vec<f64> = sub.center_dists.iter().map(|d| sub.beta * d).collect();
    c.extend(active.iter().map(|&l| sub.sp_weights[l]));
    let mut lp = StandardLP::new(c);
    for (s, &l) in active.iter().enumerate() {
        // 1 − y (b + w·q) ≤ ξ   ⇔   −y w·q − ξ ≤ y b − 1
        let y = sub.targets[l];
        let mut row: Vec<f64> = sub.code_weights[l].iter().map(|w| -y * w).collect();
        row.resize(m + k, 0.0);
        row[m + s] = -1.0;
        lp.add_le(row, y * sub.feature_scores[l] - 1.0);
    }
    let mut simplex_row = vec![1.0; m];
    simplex_row.resize(m + k, 0.0);
    lp.add_eq(simplex_row, 1.0);

    let sol = solve_lp(&lp, opts)?;
    let mut q: Vec<f64> = sol.x[..m].iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    Ok(q)
}

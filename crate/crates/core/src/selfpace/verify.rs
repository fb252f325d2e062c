//! Numerical check that a weight/regularizer pair behaves as a self-paced
//! function: convex regularizer, weight decreasing in the loss and increasing
//! in the pace, `∂f/∂v = −s`, and the closed-form weight being the actual
//! minimizer of `v·l + f(v, λ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SelfPacedFunction, ARGMIN_TOL, CONVEXITY_SLACK, DERIVATIVE_TOL};

/// Sampling grid for [`verify_scheme`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationGrid {
    /// Weights are sampled uniformly on `[v_margin, 1 − v_margin]`.
    pub v_margin: f64,
    pub v_points: usize,
    pub loss_max: f64,
    pub loss_points: usize,
    /// Pace values are sampled log-uniformly on `[lambda_min, lambda_max]`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// Central-difference step for `∂f/∂v`.
    pub fd_step: f64,
    /// Grid step of the brute-force argmin over `[0, 1]`.
    pub argmin_step: f64,
    pub argmin_samples: usize,
    pub seed: u64,
}

impl Default for VerificationGrid {
    fn default() -> Self {
        VerificationGrid {
            v_margin: 0.01,
            v_points: 100,
            loss_max: 10.0,
            loss_points: 100,
            lambda_min: 1e-5,
            lambda_max: 1e2,
            lambda_points: 100,
            fd_step: 1e-6,
            argmin_step: 1e-4,
            argmin_samples: 50,
            seed: 0,
        }
    }
}

impl VerificationGrid {
    fn v_grid(&self) -> Vec<f64> {
        linspace(self.v_margin, 1.0 - self.v_margin, self.v_points)
    }

    fn loss_grid(&self) -> Vec<f64> {
        linspace(0.0, self.loss_max, self.loss_points)
    }

    fn lambda_grid(&self) -> Vec<f64> {
        linspace(self.lambda_min.ln(), self.lambda_max.ln(), self.lambda_points).into_iter().map(f64::exp).collect()
    }
}

/// Outcome of one named check. `worst` is the largest violation observed
/// (in the units the check compares against `tolerance`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scheme: String,
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the five checks over `grid`. Failures are recorded, never raised;
/// an evaluation error counts as an infinite violation.
pub fn verify_scheme(scheme: &dyn SelfPacedFunction, grid: &VerificationGrid) -> VerificationReport {
    let checks = vec![
        check_convexity(scheme, grid),
        check_loss_monotonicity(scheme, grid),
        check_pace_monotonicity(scheme, grid),
        check_derivative(scheme, grid),
        check_argmin(scheme, grid),
    ];
    VerificationReport { scheme: scheme.label(), checks }
}

struct Tracker {
    worst: f64,
    samples: usize,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: 0.0, samples: 0 }
    }

    fn record(&mut self, violation: f64) {
        self.samples += 1;
        if violation.is_nan() {
            self.worst = f64::INFINITY;
        } else if violation > self.worst {
            self.worst = violation;
        }
    }

    fn finish(self, name: &str, tolerance: f64) -> CheckOutcome {
        CheckOutcome { name: name.to_string(), passed: self.worst <= tolerance, worst: self.worst, tolerance, samples: self.samples }
    }
}

fn or_nan(r: crate::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

/// Second differences of `f` in `v` must be ≥ the slack, and `s` must be
/// non-increasing in `v` (the equivalent first-order statement).
fn check_convexity(scheme: &dyn SelfPacedFunction, grid: &VerificationGrid) -> CheckOutcome {
    let mut t = Tracker::new();
    let vs = grid.v_grid();
    for &lambda in &grid.lambda_grid() {
        let f: Vec<f64> = vs.iter().map(|&v| or_nan(scheme.regularizer(v, lambda))).collect();
        for w in f.windows(3) {
            let second = w[0] - 2.0 * w[1] + w[2];
            // violation measured as how far below the (negative) slack we fall
            t.record(-second + CONVEXITY_SLACK);
        }
        let s: Vec<f64> = vs.iter().map(|&v| or_nan(scheme.inverse_loss(v, lambda))).collect();
        for w in s.windows(2) {
            t.record(if w[1] <= w[0] { 0.0 } else { f64::INFINITY });
        }
    }
    t.finish("convexity", 0.0)
}

fn check_loss_monotonicity(scheme: &dyn SelfPacedFunction, grid: &VerificationGrid) -> CheckOutcome {
    let mut t = Tracker::new();
    let losses = grid.loss_grid();
    for &lambda in &grid.lambda_grid() {
        let ws: Vec<f64> = losses.iter().map(|&l| or_nan(scheme.weight(l, lambda))).collect();
        for w in &ws {
            t.record(range_violation(*w));
        }
        for pair in ws.windows(2) {
            t.record((pair[1] - pair[0]).max(0.0));
        }
        // l → 0 limit stays ≤ 1; l → ∞ limit is 0.
        t.record((or_nan(scheme.weight(0.0, lambda)) - 1.0).max(0.0));
        let far = or_nan(scheme.weight(1e7 * lambda.max(1.0), lambda));
        t.record(if far <= 1e-6 { 0.0 } else { far });
    }
    t.finish("weight decreasing in loss", 0.0)
}

fn check_pace_monotonicity(scheme: &dyn SelfPacedFunction, grid: &VerificationGrid) -> CheckOutcome {
    let mut t = Tracker::new();
    let lambdas = grid.lambda_grid();
    for &loss in &grid.loss_grid() {
        let ws: Vec<f64> = lambdas.iter().map(|&lam| or_nan(scheme.weight(loss, lam))).collect();
        for pair in ws.windows(2) {
            t.record((pair[0] - pair[1]).max(0.0));
        }
        t.record((or_nan(scheme.weight(loss, 1e12)) - 1.0).max(0.0));
    }
    t.finish("weight increasing in pace", 0.0)
}

fn check_derivative(scheme: &dyn SelfPacedFunction, grid: &VerificationGrid) -> CheckOutcome {
    let mut t = Tracker::new();
    let h = grid.fd_step;
    for &lambda in &grid.lambda_grid() {
        for &v in &grid.v_grid() {
            let fd = (or_nan(scheme.regularizer(v + h, lambda)) - or_nan(scheme.regularizer(v - h, lambda))) / (2.0 * h);
            let s = or_nan(scheme.inverse_loss(v, lambda));
            t.record((fd + s).abs() / (1.0 + s.abs()));
        }
    }
    t.finish("df/dv = -s", DERIVATIVE_TOL)
}

fn check_argmin(scheme: &dyn SelfPacedFunction, grid: &VerificationGrid) -> CheckOutcome {
    let mut t = Tracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let steps = (1.0 / grid.argmin_step).round() as usize;
    let (log_lo, log_hi) = (grid.lambda_min.ln(), grid.lambda_max.ln());
    for _ in 0..grid.argmin_samples {
        let loss = rng.random_range(0.0..=grid.loss_max);
        let lambda = rng.random_range(log_lo..=log_hi).exp();
        let mut best = (f64::INFINITY, f64::NAN);
        for k in 0..=steps {
            let v = k as f64 / steps as f64;
            let value = v * loss + or_nan(scheme.regularizer(v, lambda));
            if value < best.0 {
                best = (value, v);
            }
        }
        let closed = or_nan(scheme.weight(loss, lambda));
        t.record((best.1 - closed).abs());
    }
    t.finish("grid argmin matches weight", ARGMIN_TOL)
}

fn range_violation(w: f64) -> f64 {
    if w.is_nan() {
        f64::NAN
    } else {
        (-w).max(w - 1.0).max(0.0)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfpace::{NegatedRegularizer, SchemeKind};

    #[test]
    fn every_scheme_passes_default_grid() {
        let grid = VerificationGrid::default();
        for kind in SchemeKind::ALL {
            let report = verify_scheme(&kind, &grid);
            assert_eq!(report.checks.len(), 5);
            for c in &report.checks {
                assert!(c.passed, "{kind}: {c:?}");
                assert!(c.samples >= 50);
            }
        }
    }

    #[test]
    fn negated_regularizer_fails_convexity() {
        let report = verify_scheme(&NegatedRegularizer(SchemeKind::Sigmoid), &VerificationGrid::default());
        assert!(!report.passed());
        let convexity = report.checks.iter().find(|c| c.name == "convexity").unwrap();
        assert!(!convexity.passed);
    }
}

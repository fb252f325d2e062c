//! Self-paced weighting schemes.
//!
//! Each scheme pairs a closed-form weight `v*(l, λ)` with the regularizer
//! `f(v, λ)` it minimizes against, i.e. `v*(l, λ) = argmin_{v∈[0,1]} v·l + f(v, λ)`,
//! and with the inverse-loss `s(v, λ)` satisfying `∂f/∂v = −s`. The trainer
//! only needs [`SchemeKind::weight`] for its updates; `regularizer` enters the
//! reported objective and the verifier in [`verify`].

mod verify;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use verify::{verify_scheme, CheckOutcome, VerificationGrid, VerificationReport};

/// Derivative tolerance used by the verifier, relative to `1 + |s|`.
pub const DERIVATIVE_TOL: f64 = 1e-5;
/// Allowed distance between the grid argmin and the closed-form weight.
pub const ARGMIN_TOL: f64 = 1e-3;
/// Slack on second differences of `f` before convexity is considered violated.
pub const CONVEXITY_SLACK: f64 = -1e-8;

/// Closed-form self-paced weight/regularizer pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// `v* = (π/2 − arctan(l − λ)) / π`
    Arctan,
    /// `v* = 2 / (1 + e^{l/λ})`
    Sigmoid,
    /// `v* = 1 / (1 + e^{2(l − λ)})`
    Tanh,
    /// `v* = e^{−l/λ}`
    Exponential,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Arctan, SchemeKind::Sigmoid, SchemeKind::Tanh, SchemeKind::Exponential];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Arctan => "arctan",
            SchemeKind::Sigmoid => "sigmoid",
            SchemeKind::Tanh => "tanh",
            SchemeKind::Exponential => "exponential",
        }
    }

    /// Minimizer of `v·loss + f(v, λ)` over `v ∈ [0, 1]`.
    ///
    /// Negative losses are accepted: the formulas extend to them, and the
    /// result is clipped to `[0, 1]`, which is still the exact constrained
    /// minimizer because each `f` is convex.
    pub fn weight(self, loss: f64, lambda: f64) -> Result<f64> {
        if !loss.is_finite() {
            return Err(Error::Domain(format!("loss must be finite, got {loss}")));
        }
        check_lambda(lambda)?;
        let v = match self {
            SchemeKind::Arctan => (FRAC_PI_2 - (loss - lambda).atan()) / PI,
            SchemeKind::Sigmoid => 2.0 / (1.0 + (loss / lambda).exp()),
            SchemeKind::Tanh => 1.0 / (1.0 + (2.0 * (loss - lambda)).exp()),
            SchemeKind::Exponential => (-loss / lambda).exp(),
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// The regularizer `f(v, λ)`.
    ///
    /// At `v ∈ {0, 1}` the finite limits are returned, except for `Arctan`,
    /// whose regularizer diverges there and yields `+∞`.
    pub fn regularizer(self, v: f64, lambda: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("weight must lie in [0, 1], got {v}")));
        }
        check_lambda(lambda)?;
        let f = match self {
            SchemeKind::Arctan => {
                if v == 0.0 || v == 1.0 {
                    f64::INFINITY
                } else {
                    // sin(πv) = sin(π(1−v)); the smaller argument keeps precision near 1.
                    let sin = (PI * v.min(1.0 - v)).sin();
                    -lambda * v - sin.ln() / PI
                }
            }
            SchemeKind::Sigmoid => lambda * (xlogx(2.0 - v) + xlogx(v)),
            SchemeKind::Tanh => 0.5 * (xlogx(1.0 - v) + xlogx(v)) - lambda * v,
            SchemeKind::Exponential => lambda * (xlogx(v) - v),
        };
        Ok(f)
    }

    /// The inverse loss `s(v, λ)`: the loss at which the weight equals `v`.
    pub fn inverse_loss(self, v: f64, lambda: f64) -> Result<f64> {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("inverse loss is defined only on the open interval (0, 1), got {v}")));
        }
        check_lambda(lambda)?;
        let s = match self {
            SchemeKind::Arctan => {
                let angle = PI * v;
                lambda + angle.cos() / angle.sin()
            }
            SchemeKind::Sigmoid => lambda * ((2.0 - v) / v).ln(),
            SchemeKind::Tanh => 0.5 * ((1.0 - v) / v).ln() + lambda,
            SchemeKind::Exponential => -lambda * v.ln(),
        };
        Ok(s)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme '{s}'; valid options: arctan, sigmoid, tanh, exponential")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("pace parameter must be positive and finite, got {lambda}")))
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Anything the verifier can check: a weight function with its regularizer
/// and inverse loss.
pub trait SelfPacedFunction: Sync {
    fn label(&self) -> String;
    fn weight(&self, loss: f64, lambda: f64) -> Result<f64>;
    fn regularizer(&self, v: f64, lambda: f64) -> Result<f64>;
    fn inverse_loss(&self, v: f64, lambda: f64) -> Result<f64>;
}

impl SelfPacedFunction for SchemeKind {
    fn label(&self) -> String {
        self.name().to_string()
    }
    fn weight(&self, loss: f64, lambda: f64) -> Result<f64> {
        SchemeKind::weight(*self, loss, lambda)
    }
    fn regularizer(&self, v: f64, lambda: f64) -> Result<f64> {
        SchemeKind::regularizer(*self, v, lambda)
    }
    fn inverse_loss(&self, v: f64, lambda: f64) -> Result<f64> {
        SchemeKind::inverse_loss(*self, v, lambda)
    }
}

/// A scheme with its regularizer sign-flipped. Concave by construction, so
/// the verifier must reject it; used to exercise the failure path.
#[derive(Clone, Copy, Debug)]
pub struct NegatedRegularizer(pub SchemeKind);

impl SelfPacedFunction for NegatedRegularizer {
    fn label(&self) -> String {
        format!("{}(negated f)", self.0.name())
    }
    fn weight(&self, loss: f64, lambda: f64) -> Result<f64> {
        self.0.weight(loss, lambda)
    }
    fn regularizer(&self, v: f64, lambda: f64) -> Result<f64> {
        self.0.regularizer(v, lambda).map(|f| -f)
    }
    fn inverse_loss(&self, v: f64, lambda: f64) -> Result<f64> {
        self.0.inverse_loss(v, lambda)
    }
}

/// Pace parameter `λ` together with its multiplicative growth factor `μ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaceParams {
    lambda: f64,
    mu: f64,
}

impl PaceParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(mu.is_finite() && mu > 1.0) {
            return Err(Error::Domain(format!("growth factor must exceed 1, got {mu}")));
        }
        Ok(PaceParams { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `λ ← λ·μ`
    #[must_use]
    pub fn advance(self) -> Self {
        PaceParams { lambda: self.lambda * self.mu, mu: self.mu }
    }
}

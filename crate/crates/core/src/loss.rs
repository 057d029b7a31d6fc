//! Pointwise losses, link functions and ensemble mixing rules for binary
//! classification.
//!
//! Every loss is expressed through the positive-class probability `p⁺` and
//! obeys `L(y, p) = L(1 - y, 1 - p)`, so expectations only ever need to be
//! tabulated for `y = 1`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Probabilities entering the log-likelihood are clamped to `[ε, 1 - ε]`.
pub const NLL_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    ZeroOne,
    Nll,
    Ls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    Sigmoid,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixScheme {
    /// Average of per-classifier probabilities.
    Voting,
    /// Average of raw scores, link applied once.
    ParameterMixing,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(c: f64) -> f64 {
    if c >= 0.0 {
        1.0 / (1.0 + (-c).exp())
    } else {
        let e = c.exp();
        e / (1.0 + e)
    }
}

impl LinkKind {
    /// Applies the link without validating `c`.
    #[inline]
    pub fn apply(self, c: f64) -> f64 {
        match self {
            LinkKind::Sigmoid => sigmoid(c),
            // c = 0 maps to 0, matching the ZeroOne tie rule through s(0) = 0.5
            LinkKind::Step => {
                if c > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn link(kind: LinkKind, c: f64) -> Result<f64> {
    if !c.is_finite() {
        return Err(invalid(format!("link argument must be finite, got {c}")));
    }
    Ok(kind.apply(c))
}

impl LossKind {
    /// Loss for label `y` (`true` = positive class) without range checks.
    #[inline]
    pub fn pointwise(self, positive: bool, p_plus: f64) -> f64 {
        match self {
            LossKind::ZeroOne => {
                // ties at 0.5 predict class 0
                let predicted_positive = p_plus > 0.5;
                if predicted_positive == positive {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::Nll => {
                let q = if positive { p_plus } else { 1.0 - p_plus };
                -q.clamp(NLL_CLAMP, 1.0 - NLL_CLAMP).ln()
            }
            LossKind::Ls => {
                let y = if positive { 1.0 } else { 0.0 };
                let d = y - p_plus;
                2.0 * d * d
            }
        }
    }

    pub fn has_bias_variance(self) -> bool {
        !matches!(self, LossKind::ZeroOne)
    }
}

pub fn eval_loss(kind: LossKind, y: u8, p_plus: f64) -> Result<f64> {
    if y > 1 {
        return Err(invalid(format!("label must be 0 or 1, got {y}")));
    }
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(invalid(format!("probability must lie in [0, 1], got {p_plus}")));
    }
    Ok(kind.pointwise(y == 1, p_plus))
}

/// How an ensemble turns its members' raw scores into `p⁺`.
///
/// Scores are folded one at a time: `lift` maps a score into the quantity
/// being averaged and `finish` turns the running sum into a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleRule {
    pub mix: MixScheme,
    pub link: LinkKind,
}

impl EnsembleRule {
    pub fn new(mix: MixScheme, link: LinkKind) -> Self {
        Self { mix, link }
    }

    #[inline]
    pub fn lift(&self, c: f64) -> f64 {
        match self.mix {
            MixScheme::Voting => self.link.apply(c),
            MixScheme::ParameterMixing => c,
        }
    }

    #[inline]
    pub fn finish(&self, sum: f64, k: usize) -> f64 {
        let mean = sum / k as f64;
        match self.mix {
            MixScheme::Voting => mean,
            MixScheme::ParameterMixing => self.link.apply(mean),
        }
    }

    pub fn combine(&self, scores: &[f64]) -> f64 {
        let sum: f64 = scores.iter().map(|&c| self.lift(c)).sum();
        self.finish(sum, scores.len())
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::Nll => "nll",
            LossKind::Ls => "ls",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero_one" | "zeroone" | "01" | "0/1" => Ok(LossKind::ZeroOne),
            "nll" => Ok(LossKind::Nll),
            "ls" => Ok(LossKind::Ls),
            other => Err(invalid(format!("unknown loss `{other}`"))),
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkKind::Sigmoid => "sigmoid",
            LinkKind::Step => "step",
        })
    }
}

impl FromStr for LinkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(LinkKind::Sigmoid),
            "step" => Ok(LinkKind::Step),
            other => Err(invalid(format!("unknown link `{other}`"))),
        }
    }
}

impl fmt::Display for MixScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixScheme::Voting => "voting",
            MixScheme::ParameterMixing => "pm",
        })
    }
}

impl FromStr for MixScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "voting" | "vote" => Ok(MixScheme::Voting),
            "pm" | "parameter_mixing" => Ok(MixScheme::ParameterMixing),
            other => Err(invalid(format!("unknown mixing scheme `{other}`"))),
        }
    }
}

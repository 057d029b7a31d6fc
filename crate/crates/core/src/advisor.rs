//! Design decisions derived from loss curves: ensemble size, bite size and
//! mixing scheme.

use std::fmt;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::estimator::EstimateReport;
use crate::loss::{LossKind, MixScheme};
use crate::oracle::CurveSource;

pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_MIX_BAND: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveOverK {
    k_values: Vec<usize>,
    losses: Vec<f64>,
    pub source: CurveSource,
    pub loss: LossKind,
    pub mix: MixScheme,
}

impl CurveOverK {
    pub fn new(k_values: Vec<usize>, losses: Vec<f64>, source: CurveSource, loss: LossKind, mix: MixScheme) -> Result<Self> {
        if k_values.is_empty() || k_values.len() != losses.len() {
            return Err(invalid(format!("curve has {} K values and {} losses", k_values.len(), losses.len())));
        }
        if k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("curve K values must be strictly increasing"));
        }
        if losses.iter().any(|v| !v.is_finite()) {
            return Err(invalid("curve losses must be finite"));
        }
        Ok(Self { k_values, losses, source, loss, mix })
    }

    pub fn k_values(&self) -> &[usize] {
        &self.k_values
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }
}

/// Smallest `K` whose loss is within `tau` (relative) of the loss at the
/// largest `K` on the curve.
pub fn choose_k(curve: &CurveOverK, tau: f64) -> Result<usize> {
    if !(tau >= 0.0) {
        return Err(invalid(format!("tau must be nonnegative, got {tau}")));
    }
    let last = *curve.losses.last().unwrap();
    if last == 0.0 {
        return Err(Error::DegenerateCurve("loss at the largest K is zero; the relative rule is undefined".into()));
    }
    let idx = curve
        .losses
        .iter()
        .position(|&l| (l - last) / last <= tau)
        .expect("the last point always qualifies");
    Ok(curve.k_values[idx])
}

/// Smallest bite size at which the loss curve reaches `target`,
/// interpolating linearly in `log m` between bracketing points.
///
/// `points` are `(m, loss)` pairs with strictly increasing `m`.
pub fn choose_m(points: &[(f64, f64)], target: f64) -> Result<Option<f64>> {
    if points.len() < 2 {
        return Err(invalid("need at least two bite sizes"));
    }
    if !(target > 0.0) {
        return Err(invalid(format!("target loss must be positive, got {target}")));
    }
    if points.iter().any(|&(m, l)| !(m > 0.0) || !l.is_finite()) {
        return Err(invalid("bite sizes must be positive and losses finite"));
    }
    if points.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(invalid("bite sizes must be strictly increasing without duplicates"));
    }
    let Some(j) = points.iter().position(|&(_, l)| l <= target) else {
        return Ok(None);
    };
    if j == 0 {
        return Ok(Some(points[0].0));
    }
    let (m0, l0) = points[j - 1];
    let (m1, l1) = points[j];
    let t = (l0 - target) / (l0 - l1);
    Ok(Some((m0.ln() + t * (m1.ln() - m0.ln())).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixWinner {
    ParameterMixing,
    Voting,
    TooClose,
}

impl fmt::Display for MixWinner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixWinner::ParameterMixing => "pm",
            MixWinner::Voting => "voting",
            MixWinner::TooClose => "too_close",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixDecision {
    pub winner: MixWinner,
    pub relative_gap: f64,
}

/// Decision from the two expected losses alone.
pub fn compare_mix_values(g_pm: f64, g_vote: f64, band: f64) -> Result<MixDecision> {
    if !(g_pm >= 0.0) || !(g_vote >= 0.0) || !g_pm.is_finite() || !g_vote.is_finite() {
        return Err(invalid(format!("losses must be finite and nonnegative, got ({g_pm}, {g_vote})")));
    }
    let lo = g_pm.min(g_vote);
    let diff = (g_pm - g_vote).abs();
    let relative_gap = if diff == 0.0 { 0.0 } else { diff / lo };
    let winner = if relative_gap < band {
        MixWinner::TooClose
    } else if g_pm < g_vote {
        MixWinner::ParameterMixing
    } else {
        MixWinner::Voting
    };
    Ok(MixDecision { winner, relative_gap })
}

pub fn compare_mix(report_pm: &EstimateReport, report_vote: &EstimateReport, band: f64) -> Result<MixDecision> {
    if report_pm.mix != MixScheme::ParameterMixing || report_vote.mix != MixScheme::Voting {
        return Err(invalid("expected one parameter-mixing report and one voting report"));
    }
    if report_pm.loss != report_vote.loss || report_pm.k != report_vote.k || report_pm.m != report_vote.m {
        return Err(invalid(format!(
            "reports differ in configuration: ({}, K={}, m={:?}) vs ({}, K={}, m={:?})",
            report_pm.loss, report_pm.k, report_pm.m, report_vote.loss, report_vote.k, report_vote.m
        )));
    }
    compare_mix_values(report_pm.g, report_vote.g, band)
}

/// Hex SHA-256 of a byte string.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A machine-readable record of one advisor decision.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub rule: &'static str,
    pub inputs_digest: String,
    pub decision: Value,
    pub thresholds: Value,
}

impl DecisionRecord {
    pub fn to_json(&self) -> Value {
        json!({
            "rule": self.rule,
            "inputs_digest": self.inputs_digest,
            "decision": self.decision,
            "thresholds": self.thresholds,
        })
    }
}

fn curve_digest(curve: &CurveOverK) -> String {
    let mut text = format!("{},{},{}\n", curve.source, curve.loss, curve.mix);
    for (k, l) in curve.k_values.iter().zip(&curve.losses) {
        text.push_str(&format!("{k},{l:?}\n"));
    }
    digest_hex(text.as_bytes())
}

pub fn choose_k_record(curve: &CurveOverK, tau: f64) -> Result<DecisionRecord> {
    let k = choose_k(curve, tau)?;
    Ok(DecisionRecord {
        rule: "choose_k",
        inputs_digest: curve_digest(curve),
        decision: json!({
            "k": k,
            "source": curve.source.to_string(),
            "loss": curve.loss.to_string(),
            "mix": curve.mix.to_string(),
        }),
        thresholds: json!({
            "tau": tau,
            "k_max": curve.k_values.last(),
            "loss_at_k_max": curve.losses.last(),
        }),
    })
}

pub fn choose_m_record(points: &[(f64, f64)], target: f64, k_used: usize) -> Result<DecisionRecord> {
    let m = choose_m(points, target)?;
    let text: String = points.iter().map(|(m, l)| format!("{m:?},{l:?}\n")).collect::<String>() + &format!("{target:?}");
    Ok(DecisionRecord {
        rule: "choose_m",
        inputs_digest: digest_hex(text.as_bytes()),
        decision: json!({ "m": m, "found": m.is_some() }),
        thresholds: json!({ "target": target, "k": k_used }),
    })
}

pub fn compare_mix_record(g_pm: f64, g_vote: f64, band: f64) -> Result<DecisionRecord> {
    let d = compare_mix_values(g_pm, g_vote, band)?;
    Ok(DecisionRecord {
        rule: "compare_mix",
        inputs_digest: digest_hex(format!("{g_pm:?},{g_vote:?}").as_bytes()),
        decision: json!({ "winner": d.winner.to_string(), "relative_gap": d.relative_gap }),
        thresholds: json!({ "band": band, "g_pm": g_pm, "g_vote": g_vote }),
    })
}

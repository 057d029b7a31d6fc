//! Dataset-level error estimates from per-example score statistics and
//! universal tables.

use std::io::Write;

use log::warn;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::loss::{sigmoid, LinkKind, LossKind, MixScheme};
use crate::stats::PointStats;
use crate::tables::{Lookup, StatKind, TableSet, UniversalTable};

/// Above this fraction of clamped lookups a wider table grid is advised.
pub const CLAMP_WARN_FRACTION: f64 = 0.05;

/// Constants of the closed-form logistic-normal approximations.
pub const LS_LAMBDA: f64 = 0.703;
pub const LS_DELTA: f64 = 0.937;

/// Expectation of a tabulated statistic for one example with score law
/// `N(a, sigma2)` and an ensemble of `k` members.
pub fn table_expectation(table: &UniversalTable, a: f64, sigma2: f64, k: usize) -> Result<Lookup> {
    if k == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    match table.mix() {
        MixScheme::Voting => table.lookup(a, sigma2, k as f64),
        MixScheme::ParameterMixing => table.lookup(a, sigma2 / k as f64, 1.0),
    }
}

#[inline]
fn signed_mean(p: &PointStats, y: u8) -> f64 {
    if y == 1 {
        p.mu
    } else {
        -p.mu
    }
}

fn check_inputs(stats: &[PointStats], labels: &[u8], k: usize) -> Result<()> {
    if stats.is_empty() {
        return Err(invalid("no evaluation points"));
    }
    if stats.len() != labels.len() {
        return Err(invalid(format!("{} score stats but {} labels", stats.len(), labels.len())));
    }
    if let Some(y) = labels.iter().find(|&&y| y > 1) {
        return Err(invalid(format!("label must be 0 or 1, got {y}")));
    }
    if k == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    Ok(())
}

/// Mean of per-point values plus clamp bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct GEstimate {
    pub g: f64,
    pub per_point: Vec<f64>,
    pub clamped: usize,
    pub lookups: usize,
}

/// Dataset-level expected loss `G`: the mean over points of the table value
/// at `((2y - 1) mu, sigma2, K)`.
pub fn estimate_g(
    stats: &[PointStats],
    labels: &[u8],
    loss: LossKind,
    link: LinkKind,
    mix: MixScheme,
    k: usize,
    tables: &TableSet,
) -> Result<GEstimate> {
    check_inputs(stats, labels, k)?;
    let table = tables.get(StatKind::loss_mean(loss, link), mix)?;
    let looked: Vec<Lookup> = stats
        .par_iter()
        .zip(labels)
        .map(|(p, &y)| table_expectation(table, signed_mean(p, y), p.sigma2, k))
        .collect::<Result<_>>()?;
    let per_point: Vec<f64> = looked.iter().map(|l| l.value).collect();
    Ok(GEstimate {
        g: mean(&per_point),
        clamped: looked.iter().filter(|l| l.clamped).count(),
        lookups: looked.len(),
        per_point,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2Estimate {
    pub s2: f64,
    /// `S2` divided by the number of evaluation points.
    pub s2_over_n: f64,
    pub g: GEstimate,
    pub clamped: usize,
    pub lookups: usize,
}

/// Spread of the loss over bite randomness: mean of `E L²` minus mean of `G(x, y)²`.
pub fn estimate_s2(
    stats: &[PointStats],
    labels: &[u8],
    loss: LossKind,
    link: LinkKind,
    mix: MixScheme,
    k: usize,
    tables: &TableSet,
) -> Result<S2Estimate> {
    let g = estimate_g(stats, labels, loss, link, mix, k, tables)?;
    let table = tables.get(StatKind::loss_square_mean(loss, link), mix)?;
    let looked: Vec<Lookup> = stats
        .par_iter()
        .zip(labels)
        .map(|(p, &y)| table_expectation(table, signed_mean(p, y), p.sigma2, k))
        .collect::<Result<_>>()?;
    let sq: Vec<f64> = looked.iter().map(|l| l.value).collect();
    let g_sq: Vec<f64> = g.per_point.iter().map(|v| v * v).collect();
    let s2 = mean(&sq) - mean(&g_sq);
    let clamped = g.clamped + looked.iter().filter(|l| l.clamped).count();
    let lookups = g.lookups + looked.len();
    Ok(S2Estimate { s2, s2_over_n: s2 / stats.len() as f64, g, clamped, lookups })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointBv {
    pub b: f64,
    pub v: f64,
    /// Positive-class probability of the mean distribution.
    pub p_bar_plus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvEstimate {
    pub b: f64,
    pub v: f64,
    pub per_point: Vec<PointBv>,
    pub clamped: usize,
    pub lookups: usize,
}

impl BvEstimate {
    fn from_points(looked: Vec<(PointBv, usize)>, lookups_per_point: usize) -> Self {
        let n = looked.len();
        let per_point: Vec<PointBv> = looked.iter().map(|(p, _)| *p).collect();
        let b = per_point.iter().map(|p| p.b).sum::<f64>() / n as f64;
        let v = per_point.iter().map(|p| p.v).sum::<f64>() / n as f64;
        let clamped = looked.iter().map(|(_, c)| c).sum();
        Self { b, v, per_point, clamped, lookups: n * lookups_per_point }
    }
}

/// Log-loss split around the normalized geometric mean distribution.
pub fn estimate_bv_nll(
    stats: &[PointStats],
    labels: &[u8],
    mix: MixScheme,
    k: usize,
    tables: &TableSet,
) -> Result<BvEstimate> {
    check_inputs(stats, labels, k)?;
    let table = tables.get(StatKind::LogP, mix)?;
    let looked = stats
        .par_iter()
        .zip(labels)
        .map(|(p, &y)| {
            let plus = table_expectation(table, p.mu, p.sigma2, k)?;
            let minus = table_expectation(table, -p.mu, p.sigma2, k)?;
            let (e_plus, e_minus) = (plus.value.exp(), minus.value.exp());
            // the normalizer is at most 1 in exact arithmetic; cap table noise
            let z = (e_plus + e_minus).min(1.0);
            let m_y = if y == 1 { plus.value } else { minus.value };
            let point = PointBv { b: z.ln() - m_y, v: -z.ln(), p_bar_plus: e_plus / z };
            Ok((point, plus.clamped as usize + minus.clamped as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BvEstimate::from_points(looked, 2))
}

/// Squared-loss split around the arithmetic mean probability.
///
/// Voting uses single-member moments and divides the member variance by `K`,
/// so it only needs the collapsed-normal moment tables.
pub fn estimate_bv_ls(
    stats: &[PointStats],
    labels: &[u8],
    mix: MixScheme,
    k: usize,
    tables: &TableSet,
) -> Result<BvEstimate> {
    check_inputs(stats, labels, k)?;
    let first = tables.get(StatKind::PMean, MixScheme::ParameterMixing)?;
    let second = tables.get(StatKind::PSquareMean, MixScheme::ParameterMixing)?;
    let looked = stats
        .par_iter()
        .zip(labels)
        .map(|(p, &y)| {
            let k_eff = match mix {
                MixScheme::ParameterMixing => k,
                MixScheme::Voting => 1,
            };
            let m1 = table_expectation(first, p.mu, p.sigma2, k_eff)?;
            let m2 = table_expectation(second, p.mu, p.sigma2, k_eff)?;
            let p_bar = m1.value;
            let mut var = (m2.value - p_bar * p_bar).max(0.0);
            if mix == MixScheme::Voting {
                var /= k as f64;
            }
            let d = y as f64 - p_bar;
            let point = PointBv { b: 2.0 * d * d, v: 2.0 * var, p_bar_plus: p_bar };
            Ok((point, m1.clamped as usize + m2.clamped as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BvEstimate::from_points(looked, 2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsClosedForm {
    pub p_bar_plus: f64,
    pub b: f64,
    pub v: f64,
}

fn probit_kappa(sigma2: f64) -> f64 {
    (1.0 + std::f64::consts::PI * sigma2 / 8.0).powf(-0.5)
}

/// Variance of a single member's probability under the probit-style approximation.
fn ls_single_variance(mu: f64, sigma2: f64) -> f64 {
    let kappa = probit_kappa(sigma2);
    let rho = (1.0 + LS_LAMBDA * LS_LAMBDA * sigma2).powf(-0.5);
    let second = sigmoid(rho * mu + LS_DELTA * (1.0 - rho));
    let first = sigmoid(kappa * mu);
    2.0 * (second * second - first * first)
}

/// Closed-form squared-loss mean probability, bias and variance for one point.
pub fn ls_closed_form(mu: f64, sigma2: f64, k: usize, mix: MixScheme, y: u8) -> Result<LsClosedForm> {
    if !(sigma2 >= 0.0) || !mu.is_finite() {
        return Err(invalid(format!("need finite mu and sigma2 >= 0, got ({mu}, {sigma2})")));
    }
    if k == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    if y > 1 {
        return Err(invalid(format!("label must be 0 or 1, got {y}")));
    }
    let sigma2_eff = match mix {
        MixScheme::Voting => sigma2,
        MixScheme::ParameterMixing => sigma2 / k as f64,
    };
    let p_bar = sigmoid(probit_kappa(sigma2_eff) * mu);
    let d = p_bar - y as f64;
    let v = match mix {
        MixScheme::Voting => ls_single_variance(mu, sigma2) / k as f64,
        MixScheme::ParameterMixing => ls_single_variance(mu, sigma2_eff),
    };
    Ok(LsClosedForm { p_bar_plus: p_bar, b: 2.0 * d * d, v })
}

/// What to estimate for one `(loss, mix, K)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRequest {
    pub loss: LossKind,
    pub link: LinkKind,
    pub mix: MixScheme,
    pub k: usize,
    /// Bite size, carried through to the report.
    pub m: Option<usize>,
    pub per_point: bool,
}

impl EstimateRequest {
    pub fn new(loss: LossKind, mix: MixScheme, k: usize) -> Self {
        Self { loss, link: LinkKind::Sigmoid, mix, k, m: None, per_point: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub g: f64,
    pub b: Option<f64>,
    pub v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub loss: LossKind,
    pub link: LinkKind,
    pub mix: MixScheme,
    pub k: usize,
    pub m: Option<usize>,
    pub n_eval: usize,
    pub g: f64,
    pub s2: f64,
    pub s2_over_n: f64,
    pub b: Option<f64>,
    pub v: Option<f64>,
    pub clamp_fraction: f64,
    pub per_point: Option<Vec<PointEstimate>>,
}

/// Runs every estimator that applies to the requested loss.
pub fn estimate(stats: &[PointStats], labels: &[u8], req: &EstimateRequest, tables: &TableSet) -> Result<EstimateReport> {
    let s2 = estimate_s2(stats, labels, req.loss, req.link, req.mix, req.k, tables)?;
    let bv = match req.loss {
        LossKind::Nll => Some(estimate_bv_nll(stats, labels, req.mix, req.k, tables)?),
        LossKind::Ls => Some(estimate_bv_ls(stats, labels, req.mix, req.k, tables)?),
        LossKind::ZeroOne => None,
    };
    let clamped = s2.clamped + bv.as_ref().map_or(0, |e| e.clamped);
    let lookups = s2.lookups + bv.as_ref().map_or(0, |e| e.lookups);
    let clamp_fraction = clamped as f64 / lookups as f64;
    if clamp_fraction > CLAMP_WARN_FRACTION {
        warn!(
            "{:.1}% of table lookups fell outside the grid ({} {} K={}); consider a wider table grid",
            100.0 * clamp_fraction,
            req.loss,
            req.mix,
            req.k
        );
    }
    let per_point = req.per_point.then(|| {
        s2.g.per_point
            .iter()
            .enumerate()
            .map(|(i, &g)| PointEstimate {
                g,
                b: bv.as_ref().map(|e| e.per_point[i].b),
                v: bv.as_ref().map(|e| e.per_point[i].v),
            })
            .collect()
    });
    Ok(EstimateReport {
        loss: req.loss,
        link: req.link,
        mix: req.mix,
        k: req.k,
        m: req.m,
        n_eval: stats.len(),
        g: s2.g.g,
        s2: s2.s2,
        s2_over_n: s2.s2_over_n,
        b: bv.as_ref().map(|e| e.b),
        v: bv.as_ref().map(|e| e.v),
        clamp_fraction,
        per_point,
    })
}

pub const REPORT_HEADER: &str = "K,loss,mix,G,S2,B,V,clamp_fraction";
pub const PER_POINT_HEADER: &str = "example_id,y,mu,sigma2,G_point,B_point,V_point";

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(w: &mut W, reports: &[EstimateReport]) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{:?},{:?},{},{},{:?}",
            r.k,
            r.loss,
            r.mix,
            r.g,
            r.s2,
            opt(r.b),
            opt(r.v),
            r.clamp_fraction
        )?;
    }
    Ok(())
}

pub fn write_per_point_csv<W: Write>(
    w: &mut W,
    ids: &[String],
    labels: &[u8],
    stats: &[PointStats],
    points: &[PointEstimate],
) -> Result<()> {
    if ids.len() != stats.len() || labels.len() != stats.len() || points.len() != stats.len() {
        return Err(invalid("per-point columns have different lengths"));
    }
    writeln!(w, "{PER_POINT_HEADER}")?;
    for i in 0..stats.len() {
        let p = &points[i];
        writeln!(
            w,
            "{},{},{:?},{:?},{:?},{},{}",
            ids[i],
            labels[i],
            stats[i].mu,
            stats[i].sigma2,
            p.g,
            opt(p.b),
            opt(p.v)
        )?;
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

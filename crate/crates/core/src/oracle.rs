//! Empirical baselines computed directly from a pool of trained classifiers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::learners::ScoreMatrix;
use crate::loss::{EnsembleRule, LossKind};
use crate::rng::stream_rng;

/// Where a loss curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveSource {
    Analytical,
    GroundTruth,
    OneSamp,
    EmpSamp,
}

impl fmt::Display for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveSource::Analytical => "analytical",
            CurveSource::GroundTruth => "gt",
            CurveSource::OneSamp => "one_samp",
            CurveSource::EmpSamp => "emp_samp",
        })
    }
}

impl FromStr for CurveSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytical" => Ok(CurveSource::Analytical),
            "gt" => Ok(CurveSource::GroundTruth),
            "one_samp" | "onesamp" => Ok(CurveSource::OneSamp),
            "emp_samp" | "empsamp" => Ok(CurveSource::EmpSamp),
            other => Err(invalid(format!("unknown curve source `{other}`"))),
        }
    }
}

/// Resampling plan for the pool-based oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEnsembleSpec {
    pub k_values: Vec<usize>,
    pub ensembles_per_k: usize,
    pub seed: u64,
}

impl PoolEnsembleSpec {
    pub fn new(k_values: Vec<usize>, ensembles_per_k: usize, seed: u64) -> Self {
        Self { k_values, ensembles_per_k, seed }
    }
}

/// Oracle result at one ensemble size.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub k: usize,
    /// Mean over ensembles of the dataset-average loss.
    pub mean: f64,
    /// Sample standard deviation of the dataset-average loss across ensembles.
    pub std: f64,
    /// Per-example loss averaged over ensembles.
    pub point_mean: Vec<f64>,
    /// Per-example loss variance across ensembles (divisor R).
    pub point_var: Vec<f64>,
}

impl OraclePoint {
    /// Mean over examples of the per-example loss variance.
    pub fn mean_point_var(&self) -> f64 {
        self.point_var.iter().sum::<f64>() / self.point_var.len() as f64
    }
}

/// Mixed positive-class probability of one ensemble on every example.
fn ensemble_probs(matrix: &ScoreMatrix, rule: EnsembleRule, cols: &[usize]) -> Vec<f64> {
    (0..matrix.rows())
        .map(|i| {
            let row = matrix.row(i);
            let sum: f64 = cols.iter().map(|&c| rule.lift(row[c])).sum();
            rule.finish(sum, cols.len())
        })
        .collect()
}

fn check_spec(matrix: &ScoreMatrix, spec: &PoolEnsembleSpec) -> Result<()> {
    let pool = matrix.pool_size();
    if spec.ensembles_per_k == 0 {
        return Err(invalid("need at least one ensemble per K"));
    }
    if let Some(&k) = spec.k_values.iter().find(|&&k| k == 0 || k > pool) {
        return Err(invalid(format!("ensemble size {k} is outside 1..={pool}")));
    }
    Ok(())
}

/// Probabilities of `R` resampled ensembles of size `k`, one vector per ensemble.
fn resampled_probs(matrix: &ScoreMatrix, rule: EnsembleRule, k: usize, spec: &PoolEnsembleSpec) -> Vec<Vec<f64>> {
    (0..spec.ensembles_per_k)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(spec.seed, ((k as u64) << 32) | r as u64);
            let mut cols = sample(&mut rng, matrix.pool_size(), k).into_vec();
            // fixed summation order: identical subsets give identical probabilities
            cols.sort_unstable();
            ensemble_probs(matrix, rule, &cols)
        })
        .collect()
}

/// Per-example mean and variance (divisor `R`) across ensembles.
fn across_ensembles(per_ensemble: &[Vec<f64>], n: usize) -> (Vec<f64>, Vec<f64>) {
    let r_count = per_ensemble.len() as f64;
    // deviations are taken from the first ensemble, then recentred
    let first = &per_ensemble[0];
    let mut mean = vec![0.0; n];
    let mut d_mean = vec![0.0; n];
    for l in per_ensemble {
        for i in 0..n {
            mean[i] += l[i];
            d_mean[i] += l[i] - first[i];
        }
    }
    mean.iter_mut().for_each(|a| *a /= r_count);
    d_mean.iter_mut().for_each(|a| *a /= r_count);
    let mut var = vec![0.0; n];
    for l in per_ensemble {
        for i in 0..n {
            let d = l[i] - first[i] - d_mean[i];
            var[i] += d * d;
        }
    }
    var.iter_mut().for_each(|a| *a /= r_count);
    (mean, var)
}

/// Ground-truth curve: `R` ensembles per `K`, each a uniform draw of `K` pool members
/// without replacement.
pub fn ground_truth(
    matrix: &ScoreMatrix,
    loss: LossKind,
    rule: EnsembleRule,
    spec: &PoolEnsembleSpec,
) -> Result<Vec<OraclePoint>> {
    check_spec(matrix, spec)?;
    let n = matrix.rows();
    let labels = matrix.labels();
    let r_count = spec.ensembles_per_k;
    spec.k_values
        .iter()
        .map(|&k| {
            let per_ensemble: Vec<Vec<f64>> = resampled_probs(matrix, rule, k, spec)
                .into_iter()
                .map(|p| p.iter().zip(labels).map(|(&p, &y)| loss.pointwise(y == 1, p)).collect())
                .collect();
            let totals: Vec<f64> = per_ensemble.iter().map(|l| l.iter().sum::<f64>() / n as f64).collect();
            let mean = totals.iter().sum::<f64>() / r_count as f64;
            // shifted by the first total so identical ensembles give exactly zero spread
            let shift = totals[0];
            let d_mean = totals.iter().map(|t| t - shift).sum::<f64>() / r_count as f64;
            let std = if r_count > 1 {
                let ss: f64 = totals.iter().map(|t| (t - shift - d_mean).powi(2)).sum();
                (ss / (r_count - 1) as f64).sqrt()
            } else {
                0.0
            };
            let (point_mean, point_var) = across_ensembles(&per_ensemble, n);
            Ok(OraclePoint { k, mean, std, point_mean, point_var })
        })
        .collect()
}

/// Empirical squared-loss bias and variance at one ensemble size.
#[derive(Debug, Clone, PartialEq)]
pub struct LsBvPoint {
    pub k: usize,
    /// Mean over examples of `2 (y - mean_r p_r)^2`.
    pub b: f64,
    /// Mean over examples of `2 var_r(p_r)`, with the unbiased divisor `R - 1`.
    pub v: f64,
    /// Standard error of `v` from the per-example sampling variance of the variance estimates.
    pub v_se: f64,
}

/// Squared-loss bias-variance split measured directly on resampled ensembles.
pub fn ground_truth_ls_bv(matrix: &ScoreMatrix, rule: EnsembleRule, spec: &PoolEnsembleSpec) -> Result<Vec<LsBvPoint>> {
    check_spec(matrix, spec)?;
    if spec.ensembles_per_k < 4 {
        return Err(invalid("need at least four ensembles per K for a variance estimate"));
    }
    let n = matrix.rows();
    let labels = matrix.labels();
    let r = spec.ensembles_per_k as f64;
    spec.k_values
        .iter()
        .map(|&k| {
            let probs = resampled_probs(matrix, rule, k, spec);
            let (p_bar, var_biased) = across_ensembles(&probs, n);
            let mut b = 0.0;
            let mut v = 0.0;
            let mut v_var = 0.0;
            for i in 0..n {
                let d = labels[i] as f64 - p_bar[i];
                b += 2.0 * d * d;
                let s2 = var_biased[i] * r / (r - 1.0);
                v += 2.0 * s2;
                // Var(s²) ≈ (m4 - s⁴ (R - 3) / (R - 1)) / R
                let m4 = probs.iter().map(|p| (p[i] - p_bar[i]).powi(4)).sum::<f64>() / r;
                let var_s2 = ((m4 - s2 * s2 * (r - 3.0) / (r - 1.0)) / r).max(0.0);
                v_var += 4.0 * var_s2;
            }
            let nf = n as f64;
            Ok(LsBvPoint { k, b: b / nf, v: v / nf, v_se: v_var.sqrt() / nf })
        })
        .collect()
}

/// One incremental ensemble trajectory: loss of the first `K` members for
/// `K = 1..=k_max`. With a seed, the member order is a seeded permutation.
pub fn one_samp_curve(
    matrix: &ScoreMatrix,
    loss: LossKind,
    rule: EnsembleRule,
    k_max: usize,
    seed: Option<u64>,
) -> Result<Vec<f64>> {
    let pool = matrix.pool_size();
    if k_max == 0 || k_max > pool {
        return Err(invalid(format!("k_max {k_max} is outside 1..={pool}")));
    }
    let mut order: Vec<usize> = (0..pool).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut stream_rng(seed, 0));
    }
    let order = &order[..k_max];
    let labels = matrix.labels();
    let mut sums = vec![0.0; matrix.rows()];
    let mut curve = Vec::with_capacity(k_max);
    for (j, &col) in order.iter().enumerate() {
        let mut total = 0.0;
        for (i, s) in sums.iter_mut().enumerate() {
            *s += rule.lift(matrix.row(i)[col]);
            total += loss.pointwise(labels[i] == 1, rule.finish(*s, j + 1));
        }
        curve.push(total / matrix.rows() as f64);
    }
    Ok(curve)
}

/// Ground-truth style resampling restricted to the first `k_tilde` pool members.
pub fn emp_samp_ktilde(
    matrix: &ScoreMatrix,
    k_tilde: usize,
    loss: LossKind,
    rule: EnsembleRule,
    spec: &PoolEnsembleSpec,
) -> Result<Vec<OraclePoint>> {
    if k_tilde == 0 || k_tilde > matrix.pool_size() {
        return Err(invalid(format!("k_tilde {k_tilde} is outside 1..={}", matrix.pool_size())));
    }
    if let Some(&k) = spec.k_values.iter().find(|&&k| k > k_tilde) {
        return Err(Error::Unsupported(format!(
            "empirical resampling from {k_tilde} members cannot extrapolate to K = {k}"
        )));
    }
    ground_truth(&matrix.leading_columns(k_tilde)?, loss, rule, spec)
}

pub const CURVE_HEADER: &str = "K,method,loss,mix,mean,std";

/// One row of a curve CSV; `std` is absent for single-trajectory curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub k: usize,
    pub method: CurveSource,
    pub loss: LossKind,
    pub rule: EnsembleRule,
    pub mean: f64,
    pub std: Option<f64>,
}

pub fn write_curve_csv<W: Write>(w: &mut W, rows: &[CurveRow]) -> Result<()> {
    writeln!(w, "{CURVE_HEADER}")?;
    for r in rows {
        let std = r.std.map(|s| format!("{s:?}")).unwrap_or_default();
        writeln!(w, "{},{},{},{},{:?},{}", r.k, r.method, r.loss, r.rule.mix, r.mean, std)?;
    }
    Ok(())
}

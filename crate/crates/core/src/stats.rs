//! Per-example score distribution parameters estimated from a small pool.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::learners::ScoreMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub mu: f64,
    /// Unbiased sample variance (divisor `k_tilde - 1`).
    pub sigma2: f64,
    pub k_tilde: usize,
    /// Set when `k_tilde == 1` and no variance could be estimated.
    pub degenerate: bool,
}

impl PointStats {
    /// Stats of a deterministic score.
    pub fn exact(mu: f64) -> Self {
        Self { mu, sigma2: 0.0, k_tilde: 1, degenerate: false }
    }
}

pub fn estimate_point_stats(row: &[f64]) -> Result<PointStats> {
    let k = row.len();
    if k == 0 {
        return Err(invalid("cannot estimate stats of an empty row"));
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite score {v}")));
    }
    let first = row[0];
    if row.iter().all(|&v| v == first) {
        return Ok(PointStats { mu: first, sigma2: 0.0, k_tilde: k, degenerate: k == 1 });
    }
    let mean = row.iter().sum::<f64>() / k as f64;
    let ss: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(PointStats { mu: mean, sigma2: ss / (k - 1) as f64, k_tilde: k, degenerate: false })
}

pub fn stats_for_matrix(matrix: &ScoreMatrix) -> Result<Vec<PointStats>> {
    (0..matrix.rows())
        .into_par_iter()
        .map(|i| {
            estimate_point_stats(matrix.row(i)).map_err(|e| match e {
                Error::InvalidInput(msg) => Error::InvalidInput(format!("row {i}: {msg}")),
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityDiagnostic {
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Moment-based skewness `m3 / m2^{3/2}` and excess kurtosis `m4 / m2² - 3`.
pub fn normality_diagnostic(row: &[f64]) -> Result<NormalityDiagnostic> {
    if row.len() < 3 {
        return Err(invalid(format!("normality diagnostic needs at least 3 scores, got {}", row.len())));
    }
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in row {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return Err(invalid("normality diagnostic is undefined for a constant row"));
    }
    Ok(NormalityDiagnostic { skewness: m3 / m2.powf(1.5), excess_kurtosis: m4 / (m2 * m2) - 3.0 })
}

/// `example_id,y,mu,sigma2` rows.
pub fn write_stats_csv<W: Write>(w: &mut W, ids: &[String], labels: &[u8], stats: &[PointStats]) -> Result<()> {
    writeln!(w, "example_id,y,mu,sigma2")?;
    for ((id, y), s) in ids.iter().zip(labels).zip(stats) {
        writeln!(w, "{id},{y},{:?},{:?}", s.mu, s.sigma2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{BiteMode, ScoreMeta};
    use proptest::prelude::*;

    #[test]
    fn constant_row_has_zero_variance() {
        let s = estimate_point_stats(&[0.1; 7]).unwrap();
        assert_eq!(s.mu, 0.1);
        assert_eq!(s.sigma2, 0.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn two_point_row() {
        let s = estimate_point_stats(&[-1.0, 1.0]).unwrap();
        assert_eq!(s.mu, 0.0);
        assert_eq!(s.sigma2, 2.0);
    }

    #[test]
    fn single_score_is_flagged() {
        let s = estimate_point_stats(&[3.5]).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.sigma2, 0.0);
        assert!(estimate_point_stats(&[]).is_err());
        assert!(estimate_point_stats(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn symmetric_row_has_no_skew() {
        let d = normality_diagnostic(&[-2.0, 0.0, 2.0]).unwrap();
        assert!(d.skewness.abs() < 1e-15);
        assert!(normality_diagnostic(&[1.0, 2.0]).is_err());
        assert!(normality_diagnostic(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn matrix_rows_map_to_point_stats() {
        let meta = ScoreMeta { m: 1, mode: BiteMode::IidWithReplacement, learner: "t".into(), seed: 0 };
        let m = ScoreMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1, 0, 1],
            vec![1.0, 2.0, 4.0, -1.0, -1.0, 0.5, 0.0, 10.0, -3.0],
            3,
            meta,
        )
        .unwrap();
        let stats = stats_for_matrix(&m).unwrap();
        for (i, s) in stats.iter().enumerate() {
            assert_eq!(*s, estimate_point_stats(m.row(i)).unwrap());
        }
        let permuted = stats_for_matrix(&m.permute_rows(&[2, 0, 1]).unwrap()).unwrap();
        assert_eq!(permuted, vec![stats[2], stats[0], stats[1]]);

        let one = m.permute_rows(&[1, 1, 1]).unwrap();
        assert_eq!(stats_for_matrix(&one).unwrap()[0], stats[1]);
    }

    proptest! {
        #[test]
        fn translation_and_scale_equivariance(
            row in proptest::collection::vec(-50.0f64..50.0, 2..30),
            t in -100.0f64..100.0,
            s in 0.01f64..20.0,
        ) {
            let base = estimate_point_stats(&row).unwrap();
            let shifted: Vec<f64> = row.iter().map(|v| v + t).collect();
            let sh = estimate_point_stats(&shifted).unwrap();
            let tol = 1e-9 * (1.0 + base.sigma2 + t.abs() * t.abs());
            prop_assert!((sh.mu - (base.mu + t)).abs() <= 1e-9 * (1.0 + t.abs() + base.mu.abs()));
            prop_assert!((sh.sigma2 - base.sigma2).abs() <= tol);

            let scaled: Vec<f64> = row.iter().map(|v| v * s).collect();
            let sc = estimate_point_stats(&scaled).unwrap();
            prop_assert!((sc.mu - s * base.mu).abs() <= 1e-9 * (1.0 + (s * base.mu).abs()));
            prop_assert!((sc.sigma2 - s * s * base.sigma2).abs() <= 1e-9 * (1.0 + s * s * base.sigma2));
        }

        #[test]
        fn zero_variance_iff_constant(v in -1e3f64..1e3, k in 2usize..40, bump in 1e-6f64..1.0) {
            let mut row = vec![v; k];
            prop_assert_eq!(estimate_point_stats(&row).unwrap().sigma2, 0.0);
            row[k / 2] += bump;
            prop_assert!(estimate_point_stats(&row).unwrap().sigma2 > 0.0);
        }
    }
}

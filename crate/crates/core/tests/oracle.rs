use bitewise::learners::{BiteMode, ScoreMatrix, ScoreMeta};
use bitewise::oracle::{
    emp_samp_ktilde, ground_truth, ground_truth_ls_bv, one_samp_curve, write_curve_csv, CurveRow, CurveSource,
    PoolEnsembleSpec, CURVE_HEADER,
};
use bitewise::{EnsembleRule, Error, LinkKind, LossKind, MixScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

fn meta() -> ScoreMeta {
    ScoreMeta { m: 10, mode: BiteMode::IidWithReplacement, learner: "synthetic".into(), seed: 0 }
}

fn matrix_from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> ScoreMatrix {
    let pool = rows[0].len();
    let scores = rows.iter().flatten().copied().collect();
    let ids = (0..rows.len()).map(|i| format!("x{i}")).collect();
    ScoreMatrix::new(ids, labels, scores, pool, meta()).unwrap()
}

/// Rows of iid `N(mu_i, sigma2_i)` scores; returns the matrix and the row parameters.
fn gaussian_pool(seed: u64, n: usize, pool: usize) -> (ScoreMatrix, Vec<(f64, f64)>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mu: f64 = rng.random_range(-2.0..2.0);
        let s2: f64 = rng.random_range(0.2..4.0);
        rows.push((0..pool).map(|_| mu + s2.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect());
        labels.push(rng.random_range(0..=1u8));
        params.push((mu, s2));
    }
    (matrix_from_rows(&rows, labels), params)
}

fn rule(mix: MixScheme) -> EnsembleRule {
    EnsembleRule::new(mix, LinkKind::Sigmoid)
}

#[test]
fn full_pool_ensembles_have_no_spread() {
    let (m, _) = gaussian_pool(1, 50, 8);
    let gt = ground_truth(&m, LossKind::Nll, rule(MixScheme::Voting), &PoolEnsembleSpec::new(vec![8], 5, 3)).unwrap();
    assert_eq!(gt[0].std, 0.0);
    assert!(gt[0].point_var.iter().all(|&v| v.abs() <= 1e-24));
}

#[test]
fn single_member_pool_is_the_single_classifier() {
    let m = matrix_from_rows(&[vec![0.4], vec![-1.2], vec![2.0]], vec![1, 1, 0]);
    let gt = ground_truth(&m, LossKind::Ls, rule(MixScheme::ParameterMixing), &PoolEnsembleSpec::new(vec![1], 4, 9))
        .unwrap();
    let expected: f64 = [(0.4, 1.0), (-1.2, 1.0), (2.0, 0.0)]
        .iter()
        .map(|&(c, y): &(f64, f64)| 2.0 * (y - bitewise::sigmoid(c)).powi(2))
        .sum::<f64>()
        / 3.0;
    assert!((gt[0].mean - expected).abs() <= 1e-15);
}

#[test]
fn pm_zero_one_matches_the_normal_cdf_on_gaussian_scores() {
    let (m, params) = gaussian_pool(2, 4000, 1000);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ks = vec![1, 3, 10];
    let gt = ground_truth(&m, LossKind::ZeroOne, rule(MixScheme::ParameterMixing), &PoolEnsembleSpec::new(ks.clone(), 200, 5))
        .unwrap();
    for (point, &k) in gt.iter().zip(&ks) {
        // the error on each row is independent, so the row spread gives the standard error
        let diffs: Vec<f64> = params
            .iter()
            .zip(m.labels())
            .zip(&point.point_mean)
            .map(|((&(mu, s2), &y), &l)| {
                let a = if y == 1 { mu } else { -mu };
                l - normal.cdf(-a / (s2 / k as f64).sqrt())
            })
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "K={k}: bias {mean} vs se {}", sd / n.sqrt());
    }
}

#[test]
fn doubling_the_ensemble_count_is_stable() {
    let (m, _) = gaussian_pool(3, 500, 100);
    for mix in [MixScheme::ParameterMixing, MixScheme::Voting] {
        let ks = vec![2, 5, 20];
        let a = ground_truth(&m, LossKind::Nll, rule(mix), &PoolEnsembleSpec::new(ks.clone(), 100, 17)).unwrap();
        let b = ground_truth(&m, LossKind::Nll, rule(mix), &PoolEnsembleSpec::new(ks, 200, 17)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let se = (x.std * x.std / 100.0 + y.std * y.std / 200.0).sqrt();
            assert!((x.mean - y.mean).abs() < 2.0 * se, "{mix} K={}: {} vs {}", x.k, x.mean, y.mean);
        }
    }
}

#[test]
fn negating_scores_and_labels_keeps_pm_means() {
    let (m, _) = gaussian_pool(4, 300, 30);
    let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).iter().map(|c| -c).collect()).collect();
    let flipped = matrix_from_rows(&rows, m.labels().iter().map(|y| 1 - y).collect());
    let spec = PoolEnsembleSpec::new(vec![1, 4, 15], 50, 23);
    for loss in [LossKind::Nll, LossKind::Ls, LossKind::ZeroOne] {
        let a = ground_truth(&m, loss, rule(MixScheme::ParameterMixing), &spec).unwrap();
        let b = ground_truth(&flipped, loss, rule(MixScheme::ParameterMixing), &spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.mean - y.mean).abs() <= 1e-12 * (1.0 + x.mean), "{loss} K={}", x.k);
        }
    }
}

#[test]
fn identical_columns_give_a_flat_trajectory() {
    let rows: Vec<Vec<f64>> = [0.3, -1.0, 2.5, -0.2].iter().map(|&c| vec![c; 6]).collect();
    let m = matrix_from_rows(&rows, vec![1, 0, 0, 1]);
    let curve = one_samp_curve(&m, LossKind::Nll, rule(MixScheme::Voting), 6, None).unwrap();
    for v in &curve {
        assert!((v - curve[0]).abs() <= 1e-15);
    }
}

#[test]
fn trajectory_uses_leading_columns_and_is_reproducible() {
    let (m, _) = gaussian_pool(5, 200, 12);
    let r = rule(MixScheme::Voting);
    let curve = one_samp_curve(&m, LossKind::Ls, r, 12, None).unwrap();
    for k in [1usize, 5, 12] {
        let direct: f64 = (0..m.rows())
            .map(|i| {
                let p = r.combine(&m.row(i)[..k]);
                LossKind::Ls.pointwise(m.labels()[i] == 1, p)
            })
            .sum::<f64>()
            / m.rows() as f64;
        assert!((curve[k - 1] - direct).abs() <= 1e-12);
    }
    let a = one_samp_curve(&m, LossKind::Ls, r, 12, Some(8)).unwrap();
    let b = one_samp_curve(&m, LossKind::Ls, r, 12, Some(8)).unwrap();
    assert_eq!(a, b);
    assert!(one_samp_curve(&m, LossKind::Ls, r, 13, None).is_err());
}

#[test]
fn small_pool_resampling() {
    let (m, _) = gaussian_pool(6, 300, 40);
    let r = rule(MixScheme::Voting);
    let spec = PoolEnsembleSpec::new(vec![1, 5, 25], 60, 31);
    let emp = emp_samp_ktilde(&m, 25, LossKind::Nll, r, &spec).unwrap();
    let gt = ground_truth(&m.leading_columns(25).unwrap(), LossKind::Nll, r, &spec).unwrap();
    assert_eq!(emp, gt);
    assert_eq!(emp[2].std, 0.0);

    // K = 1 with many ensembles approaches the average single-member loss
    let single: f64 = (0..25)
        .map(|c| {
            (0..m.rows()).map(|i| LossKind::Nll.pointwise(m.labels()[i] == 1, bitewise::sigmoid(m.row(i)[c]))).sum::<f64>()
                / m.rows() as f64
        })
        .sum::<f64>()
        / 25.0;
    let many = emp_samp_ktilde(&m, 25, LossKind::Nll, r, &PoolEnsembleSpec::new(vec![1], 4000, 3)).unwrap();
    assert!((many[0].mean - single).abs() <= 3.0 * many[0].std / 4000f64.sqrt());

    let err = emp_samp_ktilde(&m, 25, LossKind::Nll, r, &PoolEnsembleSpec::new(vec![26], 10, 1)).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

#[test]
fn oversized_ensembles_are_rejected() {
    let (m, _) = gaussian_pool(7, 10, 5);
    assert!(ground_truth(&m, LossKind::Nll, rule(MixScheme::Voting), &PoolEnsembleSpec::new(vec![6], 3, 1)).is_err());
    assert!(ground_truth(&m, LossKind::Nll, rule(MixScheme::Voting), &PoolEnsembleSpec::new(vec![2], 0, 1)).is_err());
}

#[test]
fn ls_bias_variance_split_matches_the_loss() {
    let (m, _) = gaussian_pool(8, 400, 60);
    let spec = PoolEnsembleSpec::new(vec![1, 3, 10], 100, 41);
    for mix in [MixScheme::ParameterMixing, MixScheme::Voting] {
        let bv = ground_truth_ls_bv(&m, rule(mix), &spec).unwrap();
        let gt = ground_truth(&m, LossKind::Ls, rule(mix), &spec).unwrap();
        for (s, g) in bv.iter().zip(&gt) {
            // E 2(y - p)² = 2(y - p̄)² + 2 var(p), with the variance divisor R
            let v_biased = s.v * 99.0 / 100.0;
            assert!((s.b + v_biased - g.mean).abs() <= 1e-12, "{mix} K={}", s.k);
            assert!(s.v_se > 0.0);
        }
    }
}

#[test]
fn curve_csv_layout() {
    let rows = vec![
        CurveRow { k: 1, method: CurveSource::GroundTruth, loss: LossKind::ZeroOne, rule: rule(MixScheme::Voting), mean: 0.25, std: Some(0.01) },
        CurveRow { k: 2, method: CurveSource::OneSamp, loss: LossKind::ZeroOne, rule: rule(MixScheme::Voting), mean: 0.2, std: None },
    ];
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, vec![CURVE_HEADER, "1,gt,zero_one,voting,0.25,0.01", "2,one_samp,zero_one,voting,0.2,"]);
}

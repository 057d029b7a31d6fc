use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::LabeledDataset;
use crate::error::{invalid, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Per-dimension variances.
    Diagonal(Vec<f64>),
    /// Row-major `d x d` matrix.
    Full(Vec<f64>),
}

impl Covariance {
    pub fn identity(d: usize) -> Self {
        Covariance::Diagonal(vec![1.0; d])
    }

    /// Lower Cholesky factor, row-major.
    fn factor(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            Covariance::Diagonal(v) => {
                if v.len() != d {
                    return Err(invalid(format!("diagonal covariance has {} entries, expected {d}", v.len())));
                }
                if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(invalid("diagonal covariance entries must be positive"));
                }
                let mut l = vec![0.0; d * d];
                for (i, &x) in v.iter().enumerate() {
                    l[i * d + i] = x.sqrt();
                }
                Ok(l)
            }
            Covariance::Full(m) => {
                if m.len() != d * d {
                    return Err(invalid(format!("covariance has {} entries, expected {}", m.len(), d * d)));
                }
                let mat = DMatrix::from_row_slice(d, d, m);
                if (&mat - mat.transpose()).amax() > 1e-12 * (1.0 + mat.amax()) {
                    return Err(invalid("covariance must be symmetric"));
                }
                let chol = mat.cholesky().ok_or_else(|| invalid("covariance is not positive definite"))?;
                let l = chol.l();
                Ok((0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect())
            }
        }
    }
}

/// Two-Gaussian class-conditional mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// P(y = 1).
    pub prior: f64,
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    pub cov_pos: Covariance,
    pub cov_neg: Covariance,
}

impl SyntheticSpec {
    /// Balanced classes with unit covariance and means `±(sep / (2√d)) · 1`, so
    /// the class means sit `sep` apart and the Bayes error is `Φ(-sep/2)`.
    pub fn symmetric(n: usize, d: usize, separation: f64) -> Self {
        let h = separation / (2.0 * (d as f64).sqrt());
        Self {
            n,
            d,
            prior: 0.5,
            mean_pos: vec![h; d],
            mean_neg: vec![-h; d],
            cov_pos: Covariance::identity(d),
            cov_neg: Covariance::identity(d),
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<LabeledDataset> {
    let d = spec.d;
    if spec.n < 2 {
        return Err(invalid("synthetic dataset needs n >= 2"));
    }
    if d == 0 {
        return Err(invalid("synthetic dataset needs d >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.prior) {
        return Err(invalid(format!("class prior must lie in [0, 1], got {}", spec.prior)));
    }
    if spec.mean_pos.len() != d || spec.mean_neg.len() != d {
        return Err(invalid("class means must have length d"));
    }
    if spec.mean_pos.iter().chain(&spec.mean_neg).any(|v| !v.is_finite()) {
        return Err(invalid("class means must be finite"));
    }
    let l_pos = spec.cov_pos.factor(d)?;
    let l_neg = spec.cov_neg.factor(d)?;

    let mut rng = stream_rng(seed, 0);
    let mut features = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    let mut z = DVector::<f64>::zeros(d);
    for _ in 0..spec.n {
        let positive = rng.random::<f64>() < spec.prior;
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let (mean, l) = if positive { (&spec.mean_pos, &l_pos) } else { (&spec.mean_neg, &l_neg) };
        for i in 0..d {
            let mut v = mean[i];
            for j in 0..=i {
                v += l[i * d + j] * z[j];
            }
            features.push(v);
        }
        labels.push(positive as u8);
    }
    LabeledDataset::new(features, labels, d)
}

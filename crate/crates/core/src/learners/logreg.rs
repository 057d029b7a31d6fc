//! L2-regularised logistic regression trained by damped Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::dataset::LabeledDataset;
use crate::error::{invalid, Result};
use crate::loss::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogregParams {
    /// Penalty `λ/2 ‖w‖²` added to the summed log-loss; the intercept is not penalised.
    pub reg_strength: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl LogregParams {
    pub fn for_bite_size(m: usize) -> Self {
        Self { reg_strength: 1e-4 * m as f64, max_iters: 500, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogregFit {
    pub model: LinearModel,
    pub iterations: usize,
    pub converged: bool,
    /// The bite held one class only; the model is the smoothed log-odds constant.
    pub single_class: bool,
}

pub fn train_logreg(dataset: &LabeledDataset, indices: &[usize], params: &LogregParams) -> Result<LogregFit> {
    if indices.is_empty() {
        return Err(invalid("cannot train on an empty bite"));
    }
    if !(params.reg_strength > 0.0) {
        return Err(invalid("reg_strength must be positive"));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= dataset.n()) {
        return Err(invalid(format!("bite index {i} out of range for {} examples", dataset.n())));
    }
    let d = dataset.d();
    let positives = indices.iter().filter(|&&i| dataset.y(i) == 1).count();
    let negatives = indices.len() - positives;
    if positives == 0 || negatives == 0 {
        let intercept = ((positives as f64 + 1.0) / (negatives as f64 + 1.0)).ln();
        return Ok(LogregFit {
            model: LinearModel { weights: vec![0.0; d], intercept },
            iterations: 0,
            converged: true,
            single_class: true,
        });
    }

    let p = d + 1;
    let lambda = params.reg_strength;
    // theta = (w, b); the augmented input is (x, 1)
    let mut theta = DVector::<f64>::zeros(p);
    let objective = |theta: &DVector<f64>| -> f64 {
        let mut f = 0.0;
        for &i in indices {
            let z = margin(dataset.x(i), theta);
            // log(1 + e^{-ỹ z}) written stably
            let t = if dataset.y(i) == 1 { -z } else { z };
            f += if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
        }
        f + 0.5 * lambda * theta.rows(0, d).norm_squared()
    };

    let mut f_cur = objective(&theta);
    let mut iterations = 0;
    let mut converged = false;
    let mut precise_steps = 0;
    let mut last_decrement = f64::INFINITY;
    while iterations < params.max_iters {
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for &i in indices {
            let x = dataset.x(i);
            let s = sigmoid(margin(x, &theta));
            let r = s - dataset.y(i) as f64;
            let w = s * (1.0 - s);
            for a in 0..p {
                let xa = if a < d { x[a] } else { 1.0 };
                grad[a] += r * xa;
                for b in 0..=a {
                    let xb = if b < d { x[b] } else { 1.0 };
                    hess[(a, b)] += w * xa * xb;
                }
            }
        }
        for a in 0..d {
            grad[a] += lambda * theta[a];
            hess[(a, a)] += lambda;
        }
        // keeps the intercept direction invertible once every point saturates
        hess[(d, d)] += 1e-12;
        for a in 0..p {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        if grad.norm() <= params.tol {
            converged = true;
            break;
        }
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let decrement = grad.dot(&step);
        if decrement <= 1e-10 * (1.0 + f_cur.abs()) {
            // the objective cannot resolve the remaining decrease, so the line search
            // would only chase rounding noise; take the pure Newton step instead
            if precise_steps > 0 && decrement >= 0.5 * last_decrement {
                converged = true;
                break;
            }
            theta -= &step;
            f_cur = objective(&theta);
            precise_steps += 1;
            last_decrement = decrement;
            iterations += 1;
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta - t * &step;
            let f_new = objective(&cand);
            if f_new <= f_cur - 1e-4 * t * decrement {
                theta = cand;
                f_cur = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // no descent left at machine precision
            converged = decrement.abs() <= 1e-10 * (1.0 + f_cur.abs());
            break;
        }
    }

    Ok(LogregFit {
        model: LinearModel { weights: theta.rows(0, d).iter().copied().collect(), intercept: theta[d] },
        iterations,
        converged,
        single_class: false,
    })
}

#[inline]
fn margin(x: &[f64], theta: &DVector<f64>) -> f64 {
    let d = x.len();
    x.iter().enumerate().map(|(j, v)| theta[j] * v).sum::<f64>() + theta[d]
}

//! Gauss–Hermite rules for expectations under a normal law.

use std::f64::consts::PI;

/// Nodes and weights for `∫ f(x) e^{-x²} dx`, nodes in decreasing order.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        // asymptotic starting guesses for the largest roots, then extrapolation
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // normalised Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[f(c)]` for `c ~ N(mean, var)` with a prepared rule.
pub struct NormalExpectation {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalExpectation {
    pub fn new(order: usize) -> Self {
        let (x, w) = gauss_hermite(order);
        let scale = PI.sqrt();
        Self { nodes: x, weights: w.into_iter().map(|v| v / scale).collect() }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, mean: f64, var: f64, f: F) -> f64 {
        let s = (2.0 * var).sqrt();
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mean + s * x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        for order in [16, 32, 64, 100] {
            let q = NormalExpectation::new(order);
            assert!((q.expect(0.0, 1.0, |_| 1.0) - 1.0).abs() < 1e-13, "order {order}");
            assert!((q.expect(0.7, 2.0, |c| c) - 0.7).abs() < 1e-13);
            assert!((q.expect(0.0, 2.0, |c| c * c) - 2.0).abs() < 1e-12);
            // E c^4 = 3 var^2
            assert!((q.expect(0.0, 1.5, |c| c.powi(4)) - 6.75).abs() < 1e-11);
        }
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let (x, w) = gauss_hermite(64);
        for i in 0..64 {
            assert_eq!(x[i], -x[63 - i]);
            assert_eq!(w[i], w[63 - i]);
            if i > 0 {
                assert!(x[i] < x[i - 1]);
            }
        }
    }

    #[test]
    fn matches_closed_form_expectation_of_exp() {
        // E e^c = exp(mean + var/2)
        let q = NormalExpectation::new(64);
        let v = q.expect(0.3, 0.8, f64::exp);
        assert!((v - (0.3f64 + 0.4).exp()).abs() < 1e-12);
    }
}

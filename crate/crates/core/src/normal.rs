use std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(c > 0)` and `P(c <= 0)` for `c ~ N(a, b)`, each computed without cancellation.
pub fn sign_probabilities(a: f64, b: f64) -> (f64, f64) {
    if b <= 0.0 {
        return if a > 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let z = a / b.sqrt();
    (norm_cdf(z), norm_cdf(-z))
}

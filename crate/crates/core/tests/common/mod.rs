//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub const CLAMP: f64 = 1e-12;

/// Logistic function through `tanh`, a different route from the library's.
pub fn sigmoid_ref(c: f64) -> f64 {
    0.5 * (1.0 + (0.5 * c).tanh())
}

/// Label-1 losses on a positive-class probability.
pub fn nll_ref(p: f64) -> f64 {
    -p.clamp(CLAMP, 1.0 - CLAMP).ln()
}

pub fn zero_one_ref(p: f64) -> f64 {
    if p > 0.5 {
        0.0
    } else {
        1.0
    }
}

pub fn ls_ref(p: f64) -> f64 {
    2.0 * (1.0 - p) * (1.0 - p)
}

pub fn log_p_ref(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP).ln()
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    /// Standard deviation of a single sample.
    pub sd: f64,
}

const CHUNK: usize = 50_000;

/// `E f(members)` where `members` holds `k` iid `N(a, b)` scores per sample.
pub fn mc<F>(seed: u64, samples: usize, a: f64, b: f64, k: usize, f: F) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let sd_b = b.sqrt();
    let partial: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(ci as u64));
            let n = CHUNK.min(samples - ci * CHUNK);
            let mut buf = vec![0.0; k];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                for c in buf.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c = a + sd_b * z;
                }
                let v = f(&buf);
                s += v;
                s2 += v * v;
            }
            (s, s2, n)
        })
        .collect();
    let (s, s2, n) = partial.iter().fold((0.0, 0.0, 0usize), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let n = n as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate { mean, se: (var / n).sqrt(), sd: var.sqrt() }
}

/// Probabilistic vote: mean of member probabilities.
pub fn vote_p(members: &[f64]) -> f64 {
    members.iter().map(|&c| sigmoid_ref(c)).sum::<f64>() / members.len() as f64
}

/// Parameter mixing: probability of the mean score.
pub fn pm_p(members: &[f64]) -> f64 {
    sigmoid_ref(members.iter().sum::<f64>() / members.len() as f64)
}

/// `E f(c)` for `c ~ N(a, b)` by the composite Simpson rule on `a ± 12 √b`.
pub fn simpson_normal<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let sd = b.sqrt();
    let n = 20_000;
    let (lo, hi) = (a - 12.0 * sd, a + 12.0 * sd);
    let h = (hi - lo) / n as f64;
    let density = |c: f64| (-(c - a) * (c - a) / (2.0 * b)).exp() / (2.0 * std::f64::consts::PI * b).sqrt();
    let g = |c: f64| f(c) * density(c);
    let mut acc = g(lo) + g(hi);
    for i in 1..n {
        let c = lo + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(c);
    }
    acc * h / 3.0
}

/// Index of `x` in `nodes`, which must contain it exactly.
pub fn node_index(nodes: &[f64], x: f64) -> usize {
    nodes.iter().position(|&v| (v - x).abs() < 1e-12).unwrap_or_else(|| panic!("{x} is not a grid node"))
}

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BiteMode {
    /// `m` indices drawn uniformly with replacement.
    IidWithReplacement,
    /// Consecutive blocks of one seeded permutation; at most `n / m` bites.
    DisjointPartition,
}

impl fmt::Display for BiteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiteMode::IidWithReplacement => "iid",
            BiteMode::DisjointPartition => "disjoint",
        })
    }
}

impl FromStr for BiteMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" => Ok(BiteMode::IidWithReplacement),
            "disjoint" => Ok(BiteMode::DisjointPartition),
            other => Err(invalid(format!("unknown bite mode `{other}`"))),
        }
    }
}

/// Draws bites for one seed. The disjoint permutation is computed once.
#[derive(Debug, Clone)]
pub struct BiteSampler {
    n: usize,
    m: usize,
    mode: BiteMode,
    seed: u64,
    permutation: Option<Vec<usize>>,
}

// stream 0 of the seed is reserved for the disjoint permutation
const PERMUTATION_STREAM: u64 = 0;

impl BiteSampler {
    pub fn new(n: usize, m: usize, mode: BiteMode, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(invalid(format!("bite size must satisfy 1 <= m <= n, got m={m}, n={n}")));
        }
        let permutation = match mode {
            BiteMode::DisjointPartition => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut stream_rng(seed, PERMUTATION_STREAM));
                Some(perm)
            }
            BiteMode::IidWithReplacement => None,
        };
        Ok(Self { n, m, mode, seed, permutation })
    }

    /// Number of bites available, `None` when unbounded.
    pub fn capacity(&self) -> Option<usize> {
        match self.mode {
            BiteMode::DisjointPartition => Some(self.n / self.m),
            BiteMode::IidWithReplacement => None,
        }
    }

    pub fn bite(&self, index: usize) -> Result<Vec<usize>> {
        match &self.permutation {
            Some(perm) => {
                let cap = self.n / self.m;
                if index >= cap {
                    return Err(Error::CapacityExceeded(format!(
                        "disjoint bite {index} requested but only {cap} bites of size {} fit in {} examples",
                        self.m, self.n
                    )));
                }
                Ok(perm[index * self.m..(index + 1) * self.m].to_vec())
            }
            None => {
                let mut rng = stream_rng(self.seed, index as u64 + 1);
                Ok((0..self.m).map(|_| rng.random_range(0..self.n)).collect())
            }
        }
    }
}

pub fn sample_bite(n: usize, m: usize, mode: BiteMode, bite_index: usize, seed: u64) -> Result<Vec<usize>> {
    BiteSampler::new(n, m, mode, seed)?.bite(bite_index)
}

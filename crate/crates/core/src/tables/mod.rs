//! Dataset-independent lookup tables of expectations under the Gaussian
//! score model, indexed by score mean `a`, score variance `b` and (for
//! voting) ensemble size `K`.

mod build;
mod grid;
mod io;
pub mod quadrature;
mod stat;

use std::collections::BTreeMap;

pub use build::{
    build_pm_table, build_vote_table, build_vote_tables, build_vote_tables_with_order, DEFAULT_MC_SAMPLES, DEFAULT_QUADRATURE_ORDER,
    MIN_MC_SAMPLES, MIN_QUADRATURE_ORDER,
};
pub use grid::{TableGrid, B_FLOOR, DEFAULT_K_VALUES};
pub use io::{load_table, save_table, table_from_bytes, table_to_bytes};
pub use stat::StatKind;

use crate::error::{invalid, Error, Result};
use crate::loss::{LinkKind, LossKind, MixScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableMeta {
    /// Zero for quadrature-only tables.
    pub mc_samples: u64,
    pub seed: u64,
    pub quadrature_order: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversalTable {
    grid: TableGrid,
    stat: StatKind,
    mix: MixScheme,
    values: Vec<f64>,
    meta: TableMeta,
    // log(b + B_FLOOR) for each b node
    t_values: Vec<f64>,
    // -1/K, increasing along the grid
    neg_inv_k: Vec<f64>,
}

/// Interpolated table value and whether any coordinate was clamped to the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    pub clamped: bool,
}

impl UniversalTable {
    pub fn from_parts(
        grid: TableGrid,
        stat: StatKind,
        mix: MixScheme,
        values: Vec<f64>,
        meta: TableMeta,
    ) -> Result<Self> {
        grid.validate()?;
        stat.validate()?;
        match (mix, grid.has_k()) {
            (MixScheme::Voting, false) => return Err(invalid("voting tables need k_values")),
            (MixScheme::ParameterMixing, true) => return Err(invalid("parameter-mixing tables take no k_values")),
            _ => {}
        }
        if values.len() != grid.len() {
            return Err(invalid(format!("expected {} table values, got {}", grid.len(), values.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("table value {v} is not finite")));
        }
        if matches!(stat, StatKind::LossMean { loss: LossKind::ZeroOne, .. })
            && values.iter().any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(invalid("0/1 loss table values must lie in [0, 1]"));
        }
        if stat == StatKind::LogP && values.iter().any(|&v| v > 0.0) {
            return Err(invalid("log-probability table values must be nonpositive"));
        }
        let t_values = grid.b_values.iter().map(|b| (b + B_FLOOR).ln()).collect();
        let neg_inv_k = grid.k_values.iter().map(|&k| -1.0 / k as f64).collect();
        Ok(Self { grid, stat, mix, values, meta, t_values, neg_inv_k })
    }

    pub fn grid(&self) -> &TableGrid {
        &self.grid
    }

    pub fn stat(&self) -> StatKind {
        self.stat
    }

    pub fn mix(&self) -> MixScheme {
        self.mix
    }

    pub fn meta(&self) -> TableMeta {
        self.meta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn n_k(&self) -> usize {
        self.grid.k_values.len().max(1)
    }

    /// Stored value at grid indices `(ia, ib, ik)`; `ik` must be 0 for two-parameter tables.
    pub fn cell(&self, ia: usize, ib: usize, ik: usize) -> f64 {
        self.values[(ia * self.grid.b_values.len() + ib) * self.n_k() + ik]
    }

    /// Interpolated value at `(a, b, k)`. `k` is ignored by parameter-mixing
    /// tables, whose callers pass the collapsed variance `b / K` as `b`. A zero
    /// variance is evaluated exactly rather than interpolated in `a`.
    pub fn lookup(&self, a: f64, b: f64, k: f64) -> Result<Lookup> {
        if a.is_nan() || b.is_nan() || k.is_nan() {
            return Err(invalid("table lookup with NaN coordinate"));
        }
        if b < 0.0 {
            return Err(invalid(format!("variance must be nonnegative, got {b}")));
        }
        if self.grid.has_k() && k < 1.0 {
            return Err(invalid(format!("ensemble size must be at least 1, got {k}")));
        }
        if b == 0.0 && self.grid.b_values[0] == 0.0 {
            // a deterministic score needs no interpolation: every member sees `a`
            return Ok(Lookup { value: self.stat.integrand(self.stat.link().apply(a)), clamped: false });
        }
        let mut clamped = false;
        let (a0, a1, wa) = bracket(&self.grid.a_values, a, &mut clamped);
        let (b0, b1, wb) = bracket(&self.t_values, (b + B_FLOOR).ln(), &mut clamped);
        let along_b = |ik_lo: usize, ik_hi: usize, wk: f64| {
            let at = |ia: usize, ib: usize| {
                let lo = self.cell(ia, ib, ik_lo);
                lo + wk * (self.cell(ia, ib, ik_hi) - lo)
            };
            let row = |ia: usize| {
                let lo = at(ia, b0);
                lo + wb * (at(ia, b1) - lo)
            };
            let lo = row(a0);
            lo + wa * (row(a1) - lo)
        };
        let value = if self.grid.has_k() {
            let (k0, k1, wk) = bracket(&self.neg_inv_k, -1.0 / k, &mut clamped);
            along_b(k0, k1, wk)
        } else {
            along_b(0, 0, 0.0)
        };
        Ok(Lookup { value, clamped })
    }
}

/// Bracketing nodes and weight for linear interpolation, exact at nodes.
fn bracket(nodes: &[f64], x: f64, clamped: &mut bool) -> (usize, usize, f64) {
    let n = nodes.len();
    if x <= nodes[0] {
        *clamped |= x < nodes[0];
        return (0, 0, 0.0);
    }
    if x >= nodes[n - 1] {
        *clamped |= x > nodes[n - 1];
        return (n - 1, n - 1, 0.0);
    }
    // first node strictly greater than x
    let hi = nodes.partition_point(|&v| v <= x);
    let lo = hi - 1;
    (lo, hi, (x - nodes[lo]) / (nodes[hi] - nodes[lo]))
}

/// Tables keyed by statistic and mixing scheme.
#[derive(Debug, Default, Clone)]
pub struct TableSet {
    tables: BTreeMap<(String, String), UniversalTable>,
}

fn key(stat: StatKind, mix: MixScheme) -> (String, String) {
    (stat.to_string(), mix.to_string())
}

impl TableSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: UniversalTable) {
        self.tables.insert(key(table.stat(), table.mix()), table);
    }

    pub fn get(&self, stat: StatKind, mix: MixScheme) -> Result<&UniversalTable> {
        self.tables
            .get(&key(stat, mix))
            .ok_or_else(|| Error::Config(format!("no {mix} table for statistic {stat}")))
    }

    pub fn contains(&self, stat: StatKind, mix: MixScheme) -> bool {
        self.tables.contains_key(&key(stat, mix))
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UniversalTable> {
        self.tables.values()
    }
}

/// The `(statistic, scheme)` pairs needed to estimate `G`, `S²` and, where
/// defined, the bias-variance split for one loss under one mixing scheme.
///
/// Voting squared-loss bias and variance only need single-member values, which
/// the parameter-mixing tables provide at `b̃ = σ²`.
pub fn required_tables(loss: LossKind, link: LinkKind, mix: MixScheme) -> Vec<(StatKind, MixScheme)> {
    let mut out = vec![(StatKind::loss_mean(loss, link), mix), (StatKind::loss_square_mean(loss, link), mix)];
    match loss {
        LossKind::Nll => out.push((StatKind::LogP, mix)),
        LossKind::Ls => {
            out.push((StatKind::PMean, MixScheme::ParameterMixing));
            out.push((StatKind::PSquareMean, MixScheme::ParameterMixing));
        }
        LossKind::ZeroOne => {}
    }
    out
}

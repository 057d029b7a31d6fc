use log::debug;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::grid::TableGrid;
use super::quadrature::NormalExpectation;
use super::stat::StatKind;
use super::{TableMeta, UniversalTable};
use crate::error::{invalid, Error, Result};
use crate::loss::{LinkKind, LossKind, MixScheme, NLL_CLAMP};
use crate::normal::sign_probabilities;
use crate::rng::stream_rng;

pub const DEFAULT_QUADRATURE_ORDER: usize = 64;
pub const DEFAULT_MC_SAMPLES: usize = 5000;
pub const MIN_QUADRATURE_ORDER: usize = 16;
pub const MIN_MC_SAMPLES: usize = 1000;

/// `E g(link(c))` for `c ~ N(a, b)` evaluated on the collapsed normal.
///
/// Integrands that only depend on the sign of `c` are integrated exactly
/// through the normal CDF; everything else goes through Gauss–Hermite.
pub(crate) fn pm_cell(stat: StatKind, q: &NormalExpectation, a: f64, b: f64) -> f64 {
    let link = stat.link();
    if b == 0.0 {
        return stat.integrand(link.apply(a));
    }
    match stat.sign_split() {
        Some((v_neg, v_pos)) => {
            let (p_pos, p_neg) = sign_probabilities(a, b);
            v_neg * p_neg + v_pos * p_pos
        }
        None => q.expect(a, b, |c| stat.integrand(link.apply(c))),
    }
}

fn check_cell(stat: StatKind, value: f64, a: f64, b: f64, k: Option<u32>) -> Result<()> {
    if value.is_finite() {
        return Ok(());
    }
    let k = k.map(|k| format!(", K={k}")).unwrap_or_default();
    Err(Error::Build(format!("{stat} produced {value} at cell (a={a}, b={b}{k})")))
}

pub fn build_pm_table(stat: StatKind, grid: &TableGrid, quadrature_order: usize) -> Result<UniversalTable> {
    stat.validate()?;
    grid.validate()?;
    if grid.has_k() {
        return Err(invalid("parameter-mixing tables are indexed by (a, b) only; drop k_values"));
    }
    if quadrature_order < MIN_QUADRATURE_ORDER {
        return Err(invalid(format!("quadrature order must be at least {MIN_QUADRATURE_ORDER}")));
    }
    let q = NormalExpectation::new(quadrature_order);
    let values = pm_values(stat, grid, &q)?;
    let meta = TableMeta { mc_samples: 0, seed: 0, quadrature_order: quadrature_order as u32 };
    UniversalTable::from_parts(grid.clone(), stat, MixScheme::ParameterMixing, values, meta)
}

fn pm_values(stat: StatKind, grid: &TableGrid, q: &NormalExpectation) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(grid.a_values.len() * grid.b_values.len());
    for &a in &grid.a_values {
        for &b in &grid.b_values {
            let v = pm_cell(stat, q, a, b);
            check_cell(stat, v, a, b, None)?;
            values.push(v);
        }
    }
    Ok(values)
}

pub fn build_vote_table(stat: StatKind, grid: &TableGrid, mc_samples: usize, seed: u64) -> Result<UniversalTable> {
    Ok(build_vote_tables(&[stat], grid, mc_samples, seed)?.remove(0))
}

/// Builds several voting tables from one shared pass over the draws.
///
/// All tables use the same standard-normal array `z[k][s]`, so a table does not
/// depend on which other statistics were built alongside it. The `K = 1` slice is
/// filled from the collapsed-normal route, which is exact for a single member.
pub fn build_vote_tables(
    stats: &[StatKind],
    grid: &TableGrid,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<UniversalTable>> {
    build_vote_tables_with_order(stats, grid, mc_samples, seed, DEFAULT_QUADRATURE_ORDER)
}

/// [`build_vote_tables`] with an explicit quadrature order for the `K = 1` slice.
pub fn build_vote_tables_with_order(
    stats: &[StatKind],
    grid: &TableGrid,
    mc_samples: usize,
    seed: u64,
    quadrature_order: usize,
) -> Result<Vec<UniversalTable>> {
    grid.validate()?;
    if quadrature_order < MIN_QUADRATURE_ORDER {
        return Err(invalid(format!("quadrature order must be at least {MIN_QUADRATURE_ORDER}")));
    }
    for s in stats {
        s.validate()?;
    }
    if stats.is_empty() {
        return Err(invalid("no statistics requested"));
    }
    if !grid.has_k() {
        return Err(invalid("voting tables need k_values"));
    }
    if mc_samples < MIN_MC_SAMPLES {
        return Err(invalid(format!("mc_samples must be at least {MIN_MC_SAMPLES}")));
    }
    let n_s = mc_samples;
    let k_max = *grid.k_values.last().unwrap() as usize;
    let mut rng = stream_rng(seed, 0);
    let z: Vec<f64> = (0..k_max * n_s).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z_abs_max = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let links: Vec<LinkKind> = {
        let mut l: Vec<LinkKind> = stats.iter().map(|s| s.link()).collect();
        l.sort_by_key(|l| *l as u8);
        l.dedup();
        l
    };
    let n_a = grid.a_values.len();
    let n_k = grid.k_values.len();
    let n_stats = stats.len();

    debug!("voting build: {} stats, {}x{}x{} cells, {} samples", n_stats, n_a, grid.b_values.len(), n_k, n_s);

    // per b: values laid out [stat][a][k]
    let per_b: Vec<Vec<f64>> = grid
        .b_values
        .par_iter()
        .map(|&b| {
            let mut out = vec![0.0; n_stats * n_a * n_k];
            if b == 0.0 {
                for (si, stat) in stats.iter().enumerate() {
                    for (ia, &a) in grid.a_values.iter().enumerate() {
                        let v = stat.integrand(stat.link().apply(a));
                        out[(si * n_a + ia) * n_k..(si * n_a + ia + 1) * n_k].fill(v);
                    }
                }
                return out;
            }
            let sb = b.sqrt();
            for &link in &links {
                let members: Vec<usize> = (0..n_stats).filter(|&i| stats[i].link() == link).collect();
                let lifted = LiftedDraws::new(link, &z, sb, z_abs_max, grid.a_values.last().unwrap().abs());
                let need_log = members.iter().any(|&i| stats[i].uses_log());
                let mut logs = vec![0.0; if need_log { n_s } else { 0 }];
                let mut sums = vec![0.0; n_s];
                for (ia, &a) in grid.a_values.iter().enumerate() {
                    sums.iter_mut().for_each(|v| *v = 0.0);
                    let mut kj = 0;
                    for k in 0..k_max {
                        lifted.accumulate(a, &z[k * n_s..(k + 1) * n_s], k, n_s, &mut sums);
                        if grid.k_values[kj] as usize == k + 1 {
                            let inv = 1.0 / (k + 1) as f64;
                            if need_log {
                                for (l, &t) in logs.iter_mut().zip(&sums) {
                                    *l = (t * inv).clamp(NLL_CLAMP, 1.0 - NLL_CLAMP).ln();
                                }
                            }
                            for &si in &members {
                                let total = sample_total(stats[si], &sums, inv, &logs);
                                out[(si * n_a + ia) * n_k + kj] = total / n_s as f64;
                            }
                            kj += 1;
                            if kj == n_k {
                                break;
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();

    let n_b = grid.b_values.len();
    let q = NormalExpectation::new(quadrature_order);
    let mut tables = Vec::with_capacity(n_stats);
    for (si, &stat) in stats.iter().enumerate() {
        let mut values = vec![0.0; n_a * n_b * n_k];
        for (ib, block) in per_b.iter().enumerate() {
            for ia in 0..n_a {
                for kj in 0..n_k {
                    values[(ia * n_b + ib) * n_k + kj] = block[(si * n_a + ia) * n_k + kj];
                }
            }
        }
        if grid.k_values[0] == 1 {
            for (ia, &a) in grid.a_values.iter().enumerate() {
                for (ib, &b) in grid.b_values.iter().enumerate() {
                    values[(ia * n_b + ib) * n_k] = pm_cell(stat, &q, a, b);
                }
            }
        }
        for (ia, &a) in grid.a_values.iter().enumerate() {
            for (ib, &b) in grid.b_values.iter().enumerate() {
                for (kj, &k) in grid.k_values.iter().enumerate() {
                    check_cell(stat, values[(ia * n_b + ib) * n_k + kj], a, b, Some(k))?;
                }
            }
        }
        let meta = TableMeta {
            mc_samples: mc_samples as u64,
            seed,
            quadrature_order: quadrature_order as u32,
        };
        tables.push(UniversalTable::from_parts(grid.clone(), stat, MixScheme::Voting, values, meta)?);
    }
    Ok(tables)
}

/// Sum over samples of the integrand at the voted probabilities `sums * inv`.
///
/// `logs` holds the clamped log-probabilities when the statistic needs them.
fn sample_total(stat: StatKind, sums: &[f64], inv: f64, logs: &[f64]) -> f64 {
    let p = sums.iter().map(|&t| t * inv);
    match stat {
        StatKind::LogP => logs.iter().sum(),
        StatKind::LossMean { loss: LossKind::Nll, .. } => -logs.iter().sum::<f64>(),
        StatKind::LossSquareMean { loss: LossKind::Nll, .. } => logs.iter().map(|l| l * l).sum(),
        StatKind::LossMean { loss: LossKind::ZeroOne, .. } | StatKind::LossSquareMean { loss: LossKind::ZeroOne, .. } => {
            p.map(|v| f64::from(u8::from(v <= 0.5))).sum()
        }
        StatKind::LossMean { loss: LossKind::Ls, .. } => p.map(|v| 2.0 * (1.0 - v) * (1.0 - v)).sum(),
        StatKind::LossSquareMean { loss: LossKind::Ls, .. } => p
            .map(|v| {
                let l = 2.0 * (1.0 - v) * (1.0 - v);
                l * l
            })
            .sum(),
        StatKind::PMean => p.sum(),
        StatKind::PSquareMean => p.map(|v| v * v).sum(),
    }
}

/// Per-`b` cache of the member probabilities as a function of `a`.
enum LiftedDraws {
    /// `s(a + √b z) = 1 / (1 + e^{-a} e^{-√b z})`, with `e^{-√b z}` cached.
    Sigmoid { decay: Vec<f64> },
    /// Same sigmoid, evaluated directly when the cached product could overflow.
    SigmoidDirect { sb: f64 },
    Step { sb: f64 },
}

impl LiftedDraws {
    fn new(link: LinkKind, z: &[f64], sb: f64, z_abs_max: f64, a_abs_max: f64) -> Self {
        match link {
            LinkKind::Step => LiftedDraws::Step { sb },
            LinkKind::Sigmoid if sb * z_abs_max + a_abs_max < 600.0 => {
                LiftedDraws::Sigmoid { decay: z.iter().map(|&v| (-sb * v).exp()).collect() }
            }
            LinkKind::Sigmoid => LiftedDraws::SigmoidDirect { sb },
        }
    }

    #[inline]
    fn accumulate(&self, a: f64, zk: &[f64], k: usize, n_s: usize, sums: &mut [f64]) {
        match self {
            LiftedDraws::Sigmoid { decay } => {
                let ea = (-a).exp();
                for (t, &d) in sums.iter_mut().zip(&decay[k * n_s..(k + 1) * n_s]) {
                    *t += 1.0 / (1.0 + ea * d);
                }
            }
            LiftedDraws::SigmoidDirect { sb } => {
                for (t, &v) in sums.iter_mut().zip(zk) {
                    *t += crate::loss::sigmoid(a + sb * v);
                }
            }
            LiftedDraws::Step { sb } => {
                for (t, &v) in sums.iter_mut().zip(zk) {
                    *t += f64::from(u8::from(a + sb * v > 0.0));
                }
            }
        }
    }
}

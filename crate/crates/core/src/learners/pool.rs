use rayon::prelude::*;

use super::bites::{BiteMode, BiteSampler};
use super::logreg::{train_logreg, LogregParams};
use super::scores::{ScoreMatrix, ScoreMeta};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub size: usize,
    pub m: usize,
    pub mode: BiteMode,
    pub params: LogregParams,
    pub seed: u64,
}

impl PoolConfig {
    pub fn new(size: usize, m: usize, mode: BiteMode, seed: u64) -> Self {
        Self { size, m, mode, params: LogregParams::for_bite_size(m), seed }
    }

    pub fn learner_description(&self) -> String {
        format!(
            "logreg(l2={:?};iters={};tol={:?})",
            self.params.reg_strength, self.params.max_iters, self.params.tol
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPool {
    pub scores: ScoreMatrix,
    /// Bites that contained a single class and got the constant fallback model.
    pub single_class_bites: usize,
    pub unconverged: usize,
}

/// Trains `size` classifiers on bites of `dataset` and scores `eval_set`.
///
/// Column `k` comes from bite `k`; columns are trained concurrently and the
/// result does not depend on scheduling.
pub fn train_pool(dataset: &LabeledDataset, eval_set: &LabeledDataset, cfg: &PoolConfig) -> Result<TrainedPool> {
    if cfg.size == 0 {
        return Err(Error::InvalidInput("pool size must be positive".into()));
    }
    if dataset.d() != eval_set.d() {
        return Err(Error::InvalidInput(format!(
            "training data has d={} but evaluation data has d={}",
            dataset.d(),
            eval_set.d()
        )));
    }
    let sampler = BiteSampler::new(dataset.n(), cfg.m, cfg.mode, cfg.seed)?;
    if let Some(cap) = sampler.capacity() {
        if cfg.size > cap {
            return Err(Error::CapacityExceeded(format!(
                "{} disjoint bites of size {} requested but only {cap} fit in {} examples",
                cfg.size,
                cfg.m,
                dataset.n()
            )));
        }
    }

    let fits: Vec<(Vec<f64>, bool, bool)> = (0..cfg.size)
        .into_par_iter()
        .map(|k| {
            let bite = sampler.bite(k)?;
            let fit = train_logreg(dataset, &bite, &cfg.params)?;
            let column = (0..eval_set.n()).map(|i| fit.model.score(eval_set.x(i))).collect();
            Ok((column, fit.single_class, fit.converged))
        })
        .collect::<Result<_>>()?;

    let single_class_bites = fits.iter().filter(|f| f.1).count();
    let unconverged = fits.iter().filter(|f| !f.2).count();
    if single_class_bites > 0 {
        log::warn!("{single_class_bites} of {} bites held a single class", cfg.size);
    }
    let columns: Vec<Vec<f64>> = fits.into_iter().map(|f| f.0).collect();
    let ids = (0..eval_set.n()).map(|i| i.to_string()).collect();
    let meta = ScoreMeta { m: cfg.m, mode: cfg.mode, learner: cfg.learner_description(), seed: cfg.seed };
    let scores = ScoreMatrix::from_columns(ids, eval_set.labels().to_vec(), &columns, meta)?;
    Ok(TrainedPool { scores, single_class_bites, unconverged })
}

//! Data generation, bite sampling, the built-in linear learner and score
//! matrices.

mod bites;
mod logreg;
mod pool;
mod scores;
mod synthetic;

pub use bites::{sample_bite, BiteMode, BiteSampler};
pub use logreg::{train_logreg, LinearModel, LogregFit, LogregParams};
pub use pool::{train_pool, PoolConfig, TrainedPool};
pub use scores::{
    export_scores, export_scores_with_note, import_scores, read_scores, write_scores, write_scores_with_note, ScoreMatrix,
    ScoreMeta,
};
pub use synthetic::{gen_synthetic, Covariance, SyntheticSpec};

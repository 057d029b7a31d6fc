//! Estimating the generalization error of bagged ensembles of classifiers
//! trained on small bites of data, from a handful of trained members and
//! precomputed universal tables.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod advisor;
pub mod dataset;
pub mod estimator;
pub mod learners;
pub mod loss;
pub mod normal;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod tables;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use loss::{eval_loss, link, sigmoid, EnsembleRule, LinkKind, LossKind, MixScheme};
pub use stats::{estimate_point_stats, stats_for_matrix, PointStats};

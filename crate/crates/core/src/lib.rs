//! Survival Kolmogorov-Arnold networks.
//!
//! A network of learnable B-spline edge activations is trained on the Cox
//! partial likelihood, pruned by edge magnitude, and converted edge by edge
//! into closed-form operators that render as a readable hazard formula.
//! A Newton-Raphson CoxPH fit, a synthetic survival-data generator and the
//! concordance index with bootstrap intervals come along as baselines and
//! evaluation tools.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cox;
pub mod data;
mod error;
pub mod expr;
pub mod linalg;
pub mod network;
pub mod splines;
pub mod symbolic;
pub mod train;

pub use cox::{
    bootstrap_ci, breslow_baseline, concordance_index, cox_loss_exact, cox_loss_fast, cox_loss_grad, coxph_fit,
    coxph_subgroup, BaselineHazard, CoxPHModel, EvalReport, FastCox, SurvivalOutcome,
};
pub use data::{
    apply_standardization, generate, invert_standardization, standardize, stratified_split, ColumnKind, ColumnMeta,
    Dataset, GeneratorSpec, Provenance, Standardization, SyntheticFormula,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use linalg::Matrix;
pub use network::{init_network, ForwardCache, Gradients, InputKind, Layer, Network, Pruned, RegPenalty};
pub use splines::{Activation, BaseFn, KnotVector};
pub use train::{
    adam_step, auto_prune, cross_validate, fit_model, random_search, AdamState, FittedModel, PruneThreshold,
    SearchSpace, TrainConfig, TrainHistory, TrialResult,
};

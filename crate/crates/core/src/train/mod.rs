//! Full-batch Adam training on the regularized Cox loss, early stopping,
//! validation-driven pruning, cross-validation and random search.

mod adam;
mod search;

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use search::{
    best_trial, cross_validate, evaluate_trial, random_search, trial_config, trial_seed, Range, SearchSpace, TrialResult,
};

use crate::cox::{concordance_index, FastCox};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::network::{init_network, Network};
use crate::splines::BaseFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ThresholdRepr {
    Fixed(f64),
    Auto(AutoTag),
}

/// Pruning threshold: a fixed value or `"auto"` (chosen on validation data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ThresholdRepr", into = "ThresholdRepr")]
pub enum PruneThreshold {
    Auto,
    Fixed(f64),
}

impl From<ThresholdRepr> for PruneThreshold {
    fn from(r: ThresholdRepr) -> Self {
        match r {
            ThresholdRepr::Fixed(v) => Self::Fixed(v),
            ThresholdRepr::Auto(_) => Self::Auto,
        }
    }
}

impl From<PruneThreshold> for ThresholdRepr {
    fn from(p: PruneThreshold) -> Self {
        match p {
            PruneThreshold::Fixed(v) => Self::Fixed(v),
            PruneThreshold::Auto => Self::Auto(AutoTag::Auto),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub lambda: f64,
    pub lambda_ent: f64,
    pub lambda_coef: f64,
    pub early_stopping: bool,
    pub patience: usize,
    pub prune_threshold: PruneThreshold,
    /// Spline grid intervals `G`.
    pub grid: usize,
    /// Spline degree `k`.
    pub degree: usize,
    pub base_kind: BaseFn,
    pub xi_b: f64,
    pub xi_s: f64,
    pub seed: u64,
    pub grid_refresh_every: usize,
    /// Hidden-layer widths; the network shape is `[inputs, hidden.., 1]`.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            steps: 300,
            lambda: 0.0,
            lambda_ent: 2.0,
            lambda_coef: 0.0,
            early_stopping: true,
            patience: 30,
            prune_threshold: PruneThreshold::Auto,
            grid: 3,
            degree: 3,
            base_kind: BaseFn::Silu,
            xi_b: 0.05,
            xi_s: 0.05,
            seed: 0,
            grid_refresh_every: 10,
            hidden: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid("learning rate must be finite and non-negative"));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        for (name, v) in [("lambda", self.lambda), ("lambda_ent", self.lambda_ent), ("lambda_coef", self.lambda_coef)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if let PruneThreshold::Fixed(t) = self.prune_threshold {
            if !(t >= 0.0) {
                return Err(invalid("prune threshold must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn shape(&self, inputs: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(inputs);
        s.extend_from_slice(&self.hidden);
        s.push(1);
        s
    }

    /// A freshly initialized network for `data`.
    pub fn init(&self, data: &Dataset) -> Result<Network> {
        let mut net =
            init_network(&self.shape(data.cols()), self.base_kind, self.grid, self.degree, self.xi_b, self.xi_s, self.seed)?;
        net.set_input_meta(data.input_meta())?;
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Normalized Cox loss plus `λ·R`, per step.
    pub loss: Vec<f64>,
    pub penalty: Vec<f64>,
    /// Validation C-index per step; empty without early stopping.
    pub val_c_index: Vec<f64>,
    /// Step whose parameters were kept.
    pub best_step: usize,
}

/// Seeded, event-stratified holdout: the last `fraction` of each shuffled
/// event class. Returns `(fit_rows, validation_rows)`, both sorted.
pub fn validation_split(data: &Dataset, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_7A11);
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for flag in [true, false] {
        let mut rows: Vec<usize> = (0..data.rows()).filter(|&i| data.outcome.events()[i] == flag).collect();
        rows.shuffle(&mut rng);
        let k = (rows.len() as f64 * fraction).round() as usize;
        let cut = rows.len() - k;
        fit.extend_from_slice(&rows[..cut]);
        val.extend_from_slice(&rows[cut..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Rows used for fitting and for validation under `cfg`. Without early
/// stopping, or when the holdout cannot score or fit, every row is used for
/// fitting and the validation set is empty.
pub fn training_rows(data: &Dataset, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..data.rows()).collect();
    if !cfg.early_stopping {
        return (all, Vec::new());
    }
    let (fit, val) = validation_split(data, 0.2, cfg.seed);
    let events = |rows: &[usize]| rows.iter().filter(|&&i| data.outcome.events()[i]).count();
    if val.len() < 2 || events(&val) == 0 || events(&fit) == 0 {
        log::warn!("validation holdout has no events; training without early stopping");
        return (all, Vec::new());
    }
    (fit, val)
}

fn c_index_or_half(net: &Network, data: &Dataset) -> Result<f64> {
    let theta = net.predict(&data.x)?;
    match concordance_index(&theta, &data.outcome) {
        Ok(c) => Ok(c),
        Err(Error::UndefinedMetric(_)) => Ok(0.5),
        Err(e) => Err(e),
    }
}

/// Trains `net` on `data`. Returns the trained network (the best-validation
/// parameters under early stopping) and the per-step history.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    if data.outcome.event_count() == 0 {
        return Err(invalid("training data has no observed events"));
    }
    if net.shape()[0] != data.cols() {
        return Err(invalid(format!("network expects {} inputs, data has {}", net.shape()[0], data.cols())));
    }
    let (fit_rows, val_rows) = training_rows(data, cfg);
    let fit = data.select_rows(&fit_rows);
    let val = (!val_rows.is_empty()).then(|| data.select_rows(&val_rows));

    let mut net = net.clone();
    net.fit_input_knots(&data.x)?;
    let cox = FastCox::new(&fit.outcome);
    let scale = 1.0 / cox.n_events() as f64;
    let mut adam = AdamState::new(net.param_count());
    let mut history = TrainHistory { loss: Vec::new(), penalty: Vec::new(), val_c_index: Vec::new(), best_step: 0 };
    let mut best: Option<(f64, Network)> = None;
    let mut stale = 0usize;
    let refresh_until = cfg.steps / 2;

    for step in 0..cfg.steps {
        let (theta, cache) = net.forward(&fit.x)?;
        let (loss, mut dl) = cox.loss_and_grad(&theta);
        for g in dl.iter_mut() {
            *g *= scale;
        }
        let (grads, pen) = net.regularized_gradients(&cache, &dl, cfg.lambda, cfg.lambda_ent, cfg.lambda_coef)?;
        let total = loss * scale + cfg.lambda * pen.total;
        if !total.is_finite() {
            return Err(Error::Diverged { step });
        }
        history.loss.push(total);
        history.penalty.push(pen.total);

        if let Some(val) = &val {
            let c = c_index_or_half(&net, val)?;
            history.val_c_index.push(c);
            if best.as_ref().is_none_or(|(b, _)| c > *b) {
                best = Some((c, net.clone()));
                history.best_step = step;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        } else {
            history.best_step = step;
        }

        let mut params = net.params();
        adam_step(&mut params, &grads.flatten(), &mut adam, cfg.learning_rate);
        net.set_params(&params)?;

        if cfg.grid_refresh_every > 0 && (step + 1) % cfg.grid_refresh_every == 0 && step < refresh_until && net.depth() > 1 {
            let (_, cache) = net.forward(&fit.x)?;
            net.refresh_hidden_knots(&cache)?;
        }
    }
    let out = match best {
        Some((_, b)) => b,
        None => net,
    };
    Ok((out, history))
}

/// Candidate thresholds: zero plus every distinct edge magnitude, ascending.
fn threshold_candidates(edge_l1: &[Vec<f64>], net: &Network) -> Vec<f64> {
    let mut c: Vec<f64> = edge_l1
        .iter()
        .zip(net.layers())
        .flat_map(|(l1, layer)| l1.iter().zip(&layer.edges).filter(|(_, e)| e.active).map(|(v, _)| *v))
        .collect();
    c.push(0.0);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Prunes a trained network. With an automatic threshold every candidate is
/// scored by C-index on the validation holdout (on the training rows when
/// early stopping is off) and the best one wins, ties going to the larger,
/// sparser threshold. A fixed threshold that would disconnect the output
/// falls back to the largest feasible one.
pub fn auto_prune(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<(Network, f64)> {
    let (fit_rows, val_rows) = training_rows(data, cfg);
    let fit = data.select_rows(&fit_rows);
    let (_, cache) = net.forward(&fit.x)?;
    let pen = net.penalty(&cache, 0.0, 0.0)?;
    match cfg.prune_threshold {
        PruneThreshold::Fixed(t) => match net.prune(t, &cache) {
            Ok(p) => Ok((p.network, t)),
            Err(Error::PruneTooAggressive { max_feasible }) => {
                log::warn!("prune threshold {t} disconnects the output; using {max_feasible}");
                let p = net.prune(max_feasible, &cache)?;
                Ok((p.network, max_feasible))
            }
            Err(e) => Err(e),
        },
        PruneThreshold::Auto => {
            let score_set = if val_rows.is_empty() { fit } else { data.select_rows(&val_rows) };
            let mut best: Option<(f64, f64, Network)> = None;
            for t in threshold_candidates(&pen.edge_l1, net) {
                let Some(p) = net.prune_with_l1(t, &pen.edge_l1) else { continue };
                let c = c_index_or_half(&p.network, &score_set)?;
                if best.as_ref().is_none_or(|(bc, _, _)| c >= *bc) {
                    best = Some((c, t, p.network));
                }
            }
            let (_, t, n) = best.ok_or(Error::PruneTooAggressive { max_feasible: 0.0 })?;
            Ok((n, t))
        }
    }
}

/// Outcome of training plus pruning one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub trained: Network,
    pub pruned: Network,
    pub threshold: f64,
    pub history: TrainHistory,
}

/// Initializes, trains and prunes a network for `data` under `cfg`.
pub fn fit_model(data: &Dataset, cfg: &TrainConfig) -> Result<FittedModel> {
    let net = cfg.init(data)?;
    let (trained, history) = train(&net, data, cfg)?;
    let (pruned, threshold) = auto_prune(&trained, data, cfg)?;
    Ok(FittedModel { trained, pruned, threshold, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorSpec, SyntheticFormula};

    fn small(formula: SyntheticFormula, n: usize) -> Dataset {
        generate(&GeneratorSpec::new(formula, n, 10, 11)).unwrap().0
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let data = small(SyntheticFormula::Linear { beta: alloc::vec![1.0, -0.5] }, 200);
        let cfg = TrainConfig { learning_rate: 0.0, steps: 5, early_stopping: false, ..TrainConfig::default() };
        let net = cfg.init(&data).unwrap();
        let (out, h) = train(&net, &data, &cfg).unwrap();
        assert_eq!(out.params(), net.params());
        assert!(h.loss.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn validation_split_is_stratified() {
        let data = small(SyntheticFormula::Gaussian, 1000);
        let (fit, val) = validation_split(&data, 0.2, 3);
        assert_eq!(fit.len() + val.len(), 1000);
        assert!((val.len() as i64 - 200).abs() <= 1);
        let rate = |r: &[usize]| r.iter().filter(|&&i| data.outcome.events()[i]).count() as f64 / r.len() as f64;
        assert!((rate(&fit) - rate(&val)).abs() < 0.01);
    }

    #[test]
    fn early_stopping_restores_best() {
        let data = small(SyntheticFormula::Gaussian, 600);
        let cfg = TrainConfig { steps: 60, patience: 10, hidden: alloc::vec![2], ..TrainConfig::default() };
        let (net, h) = train(&cfg.init(&data).unwrap(), &data, &cfg).unwrap();
        let best = h.val_c_index[h.best_step];
        assert!(h.val_c_index.iter().all(|&c| c <= best));
        let (_, val) = training_rows(&data, &cfg);
        let c = c_index_or_half(&net, &data.select_rows(&val)).unwrap();
        assert_eq!(c, best);
    }
}

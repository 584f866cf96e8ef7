#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_model, PruneThreshold, TrainConfig};
use crate::cox::concordance_index;
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::splines::BaseFn;

/// Closed interval sampled uniformly, or log-uniformly when `log` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub log: bool,
}

impl Range {
    pub const fn uniform(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: false }
    }

    pub const fn log_uniform(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: true }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v, log: false }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.lo <= self.hi && self.lo.is_finite() && self.hi.is_finite() && (!self.log || self.lo > 0.0);
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("search range {name} is invalid")))
        }
    }
}

/// Hyperparameter distributions for [`random_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rate: Range,
    pub grid: Vec<usize>,
    pub lambda: Range,
    pub lambda_ent: Range,
    pub lambda_coef: Range,
    pub xi_b: Range,
    pub xi_s: Range,
    /// Inclusive bounds on the number of hidden layers.
    pub hidden_layers: [usize; 2],
    /// Inclusive bounds on each hidden width.
    pub width: [usize; 2],
    pub base_kind: Vec<BaseFn>,
    pub early_stopping: Vec<bool>,
    /// Used by trials without early stopping.
    pub prune_threshold: Range,
    pub steps: usize,
    pub patience: usize,
    pub degree: usize,
    pub grid_refresh_every: usize,
    pub folds: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: Range::log_uniform(1e-3, 1e-1),
            grid: vec![3, 4, 5],
            lambda: Range::log_uniform(1e-4, 2e-2),
            lambda_ent: Range::uniform(0.0, 14.0),
            lambda_coef: Range::uniform(0.0, 5.0),
            xi_b: Range::uniform(0.001, 0.2),
            xi_s: Range::uniform(0.001, 0.2),
            hidden_layers: [0, 2],
            width: [1, 20],
            base_kind: vec![BaseFn::Identity, BaseFn::Silu],
            early_stopping: vec![true, false],
            prune_threshold: Range::log_uniform(1e-3, 5e-2),
            steps: 300,
            patience: 30,
            degree: 3,
            grid_refresh_every: 10,
            folds: 4,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("learning_rate", &self.learning_rate),
            ("lambda", &self.lambda),
            ("lambda_ent", &self.lambda_ent),
            ("lambda_coef", &self.lambda_coef),
            ("xi_b", &self.xi_b),
            ("xi_s", &self.xi_s),
            ("prune_threshold", &self.prune_threshold),
        ] {
            r.validate(name)?;
        }
        if self.grid.is_empty() || self.base_kind.is_empty() || self.early_stopping.is_empty() {
            return Err(invalid("search space choices must not be empty"));
        }
        if self.hidden_layers[0] > self.hidden_layers[1] || self.width[0] > self.width[1] || self.width[0] == 0 {
            return Err(invalid("search space layer bounds are invalid"));
        }
        if self.folds < 2 {
            return Err(invalid("cross-validation needs at least two folds"));
        }
        Ok(())
    }
}

/// Seed of trial `trial` in a search seeded by `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The configuration sampled for one trial. Depends only on
/// `(space, seed, trial)`, so trials can be evaluated in any order.
pub fn trial_config(space: &SearchSpace, seed: u64, trial: usize) -> TrainConfig {
    let s = trial_seed(seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let learning_rate = space.learning_rate.sample(&mut rng);
    let grid = *space.grid.choose(&mut rng).unwrap_or(&3);
    let lambda = space.lambda.sample(&mut rng);
    let lambda_ent = space.lambda_ent.sample(&mut rng);
    let lambda_coef = space.lambda_coef.sample(&mut rng);
    let xi_b = space.xi_b.sample(&mut rng);
    let xi_s = space.xi_s.sample(&mut rng);
    let layers = rng.random_range(space.hidden_layers[0]..=space.hidden_layers[1]);
    let hidden = (0..layers).map(|_| rng.random_range(space.width[0]..=space.width[1])).collect();
    let base_kind = *space.base_kind.choose(&mut rng).unwrap_or(&BaseFn::Silu);
    let early_stopping = *space.early_stopping.choose(&mut rng).unwrap_or(&true);
    let threshold = space.prune_threshold.sample(&mut rng);
    TrainConfig {
        learning_rate,
        steps: space.steps,
        lambda,
        lambda_ent,
        lambda_coef,
        early_stopping,
        patience: space.patience,
        prune_threshold: if early_stopping { PruneThreshold::Auto } else { PruneThreshold::Fixed(threshold) },
        grid,
        degree: space.degree,
        base_kind,
        xi_b,
        xi_s,
        seed: s,
        grid_refresh_every: space.grid_refresh_every,
        hidden,
    }
}

fn fold_assignment(data: &Dataset, folds: usize, seed: u64, stratified: bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF01D_5EED);
    let mut fold = vec![0; data.rows()];
    let classes: Vec<Vec<usize>> = if stratified {
        [true, false]
            .iter()
            .map(|&f| (0..data.rows()).filter(|&i| data.outcome.events()[i] == f).collect())
            .collect()
    } else {
        vec![(0..data.rows()).collect()]
    };
    for mut rows in classes {
        rows.shuffle(&mut rng);
        for (pos, &r) in rows.iter().enumerate() {
            fold[r] = pos % folds;
        }
    }
    fold
}

/// Mean validation C-index of the pruned model over `folds` folds. Rows are
/// shuffled with the configuration seed and dealt round-robin; if a fold
/// ends up without events the assignment is redone per event class.
pub fn cross_validate(data: &Dataset, cfg: &TrainConfig, folds: usize) -> Result<f64> {
    if folds < 2 {
        return Err(invalid("cross-validation needs at least two folds"));
    }
    if data.outcome.event_count() < folds {
        return Err(invalid(format!("{} events cannot populate {folds} folds", data.outcome.event_count())));
    }
    let has_events = |fold: &[usize]| {
        (0..folds).all(|f| (0..data.rows()).any(|i| fold[i] == f && data.outcome.events()[i]))
    };
    let mut fold = fold_assignment(data, folds, cfg.seed, false);
    if !has_events(&fold) {
        fold = fold_assignment(data, folds, cfg.seed, true);
    }
    let mut total = 0.0;
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..data.rows()).filter(|&i| fold[i] != f).collect();
        let val_idx: Vec<usize> = (0..data.rows()).filter(|&i| fold[i] == f).collect();
        let fitted = fit_model(&data.select_rows(&train_idx), cfg)?;
        let val = data.select_rows(&val_idx);
        let theta = fitted.pruned.predict(&val.x)?;
        total += concordance_index(&theta, &val.outcome)?;
    }
    Ok(total / folds as f64)
}

/// One leaderboard row; `mean_c` is `None` when the trial failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub config: TrainConfig,
    pub mean_c: Option<f64>,
}

pub fn evaluate_trial(data: &Dataset, space: &SearchSpace, seed: u64, trial: usize) -> TrialResult {
    let config = trial_config(space, seed, trial);
    let mean_c = match cross_validate(data, &config, space.folds) {
        Ok(c) if c.is_finite() => Some(c),
        Ok(_) => None,
        Err(e) => {
            log::warn!("trial {trial} failed: {e}");
            None
        }
    };
    TrialResult { trial, config, mean_c }
}

/// Best configuration of a finished leaderboard: highest mean C-index,
/// earliest trial on ties.
pub fn best_trial(board: &[TrialResult]) -> Result<&TrialResult> {
    let mut best: Option<&TrialResult> = None;
    for r in board {
        if let Some(c) = r.mean_c {
            if best.and_then(|b| b.mean_c).is_none_or(|bc| c > bc) {
                best = Some(r);
            }
        }
    }
    best.ok_or_else(|| Error::InvalidState("every search trial failed".into()))
}

/// Samples `trials` configurations, scores each by cross-validation and
/// returns the best one with the full leaderboard in trial order.
pub fn random_search(
    data: &Dataset,
    space: &SearchSpace,
    trials: usize,
    seed: u64,
) -> Result<(TrainConfig, Vec<TrialResult>)> {
    space.validate()?;
    if trials == 0 {
        return Err(invalid("random search needs at least one trial"));
    }
    let board: Vec<TrialResult> = (0..trials).map(|t| evaluate_trial(data, space, seed, t)).collect();
    let best = best_trial(&board)?.config.clone();
    Ok((best, board))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorSpec, SyntheticFormula};

    #[test]
    fn trial_configs_are_reproducible_and_in_range() {
        let space = SearchSpace::default();
        for t in 0..50 {
            let a = trial_config(&space, 3, t);
            assert_eq!(a, trial_config(&space, 3, t));
            assert!((1e-3..=1e-1).contains(&a.learning_rate));
            assert!((1e-4..=2e-2).contains(&a.lambda));
            assert!(a.hidden.len() <= 2 && a.hidden.iter().all(|w| (1..=20).contains(w)));
            assert!([3, 4, 5].contains(&a.grid));
        }
        assert_ne!(trial_config(&space, 3, 0), trial_config(&space, 3, 1));
    }

    #[test]
    fn fold_sizes() {
        let (data, _) = generate(&GeneratorSpec::new(SyntheticFormula::Gaussian, 8000, 10, 1)).unwrap();
        let fold = fold_assignment(&data, 4, 9, false);
        for f in 0..4 {
            assert_eq!(fold.iter().filter(|&&v| v == f).count(), 2000);
        }
    }

    #[test]
    fn best_trial_picks_argmax() {
        let cfg = TrainConfig::default();
        let row = |trial, mean_c| TrialResult { trial, config: cfg.clone(), mean_c };
        let board = vec![row(0, Some(0.6)), row(1, None), row(2, Some(0.7)), row(3, Some(0.7))];
        assert_eq!(best_trial(&board).unwrap().trial, 2);
        assert!(best_trial(&[row(0, None)]).is_err());
    }
}

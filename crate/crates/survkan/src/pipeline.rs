//! Pipeline stages on in-memory data: train, search, symbolic fitting and
//! evaluation. The CLI wraps these with file handling.

use std::thread;

use serde::{Deserialize, Serialize};
use survkan_core::symbolic::{
    auto_symbolic, finetune_affine, render_formula, term_importance, FinetuneConfig, SymbolicOptions,
};
use survkan_core::train::{best_trial, evaluate_trial, TrainHistory, TrialResult};
use survkan_core::{
    bootstrap_ci, concordance_index, coxph_fit, fit_model, standardize, Dataset, SearchSpace, TrainConfig,
};

use crate::error::{Error, Result};
use crate::model::{ModelFile, Stage, SymbolicStage, MODEL_FORMAT};
use crate::report::{Fingerprints, RunReport, StageReport, TermReport, REPORT_FORMAT};

/// Ridge used for the linear baseline.
pub const COXPH_RIDGE: f64 = 1e-6;

/// Trains, prunes and fits the linear baseline. With `standardize` the
/// continuous columns are z-scored first and the statistics kept in the
/// model.
pub fn train_model(data: &Dataset, cfg: &TrainConfig, standardize_columns: bool, train_sha256: String) -> Result<(ModelFile, TrainHistory)> {
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let data = if standardize_columns { standardize(data) } else { data.clone() };
    let fitted = fit_model(&data, cfg)?;
    let coxph = coxph_fit(&data.x, &data.outcome, COXPH_RIDGE)?;
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        columns: data.columns.clone(),
        config: cfg.clone(),
        train_sha256,
        trained: fitted.trained,
        pruned: fitted.pruned,
        prune_threshold: fitted.threshold,
        coxph,
        symbolic: None,
    };
    Ok((model, fitted.history))
}

/// Random search with trials spread over `jobs` threads. Trials are
/// independent and seeded by index, so the leaderboard does not depend on
/// `jobs`.
pub fn search(data: &Dataset, space: &SearchSpace, trials: usize, seed: u64, jobs: usize) -> Result<(TrainConfig, Vec<TrialResult>)> {
    space.validate().map_err(|e| Error::Usage(e.to_string()))?;
    if trials == 0 {
        return Err(Error::Usage("--trials must be at least 1".into()));
    }
    let jobs = jobs.clamp(1, trials);
    let mut board: Vec<TrialResult> = thread::scope(|s| {
        let workers: Vec<_> = (0..jobs)
            .map(|w| {
                s.spawn(move || {
                    (w..trials)
                        .step_by(jobs)
                        .map(|t| {
                            let r = evaluate_trial(data, space, seed, t);
                            log::info!("trial {t}: mean C {:?}", r.mean_c);
                            r
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        workers.into_iter().flat_map(|h| h.join().expect("search worker panicked")).collect()
    });
    board.sort_by_key(|r| r.trial);
    let best = best_trial(&board)?.config.clone();
    Ok((best, board))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolicSettings {
    pub options: SymbolicOptions,
    pub finetune: FinetuneConfig,
    /// Significant figures in the rendered formula.
    pub precision: usize,
}

impl Default for SymbolicSettings {
    fn default() -> Self {
        Self { options: SymbolicOptions::default(), finetune: FinetuneConfig::default(), precision: 3 }
    }
}

/// Fits closed forms to every edge of the pruned network on the training
/// rows, fine-tunes them and stores the result in `model`.
pub fn symbolic_stage(model: &mut ModelFile, train: &Dataset, settings: &SymbolicSettings) -> Result<()> {
    let data = model.prepare(train)?;
    let (_, cache) = model.pruned.forward(&data.x)?;
    let (sym, edges) = auto_symbolic(&model.pruned, &cache, &settings.options)?;
    let (sym, finetune) = if settings.finetune.steps > 0 {
        let (tuned, rep) = finetune_affine(&sym, &data.x, &data.outcome, &settings.finetune)?;
        (tuned, Some(rep))
    } else {
        (sym, None)
    };
    let (formula, text) = render_formula(&sym, &data.names(), &data.labels(), settings.precision)?;
    model.symbolic = Some(SymbolicStage { network: sym, formula, text, edges, finetune });
    Ok(())
}

/// C-index with bootstrap intervals for every stored stage, the linear
/// baseline and (for generated data) the true log-hazard, all on `test`.
pub fn evaluate(model: &ModelFile, test: &Dataset, bootstrap: usize, seed: u64, fingerprints: Fingerprints) -> Result<RunReport> {
    if bootstrap == 0 {
        return Err(Error::Usage("--bootstrap must be at least 1".into()));
    }
    let data = model.prepare(test)?;
    let mut stages = Vec::new();
    for stage in model.stages() {
        let theta = model.network(stage)?.predict(&data.x)?;
        stages.push(StageReport { stage, eval: bootstrap_ci(&theta, &data.outcome, bootstrap, seed)? });
    }
    let coxph = bootstrap_ci(&model.coxph.predict(&data.x), &data.outcome, bootstrap, seed)?;
    let true_c_index = match data.true_theta() {
        Some(theta) => Some(concordance_index(theta, &data.outcome)?),
        None => None,
    };
    let (formula, term_importance) = match &model.symbolic {
        Some(s) => {
            let names = data.names();
            let labels = data.labels();
            let terms = term_importance(&s.formula, &data.x)?
                .into_iter()
                .map(|t| TermReport { term: s.formula.terms[t.term].render(&names, &labels, 3), sigma: t.sigma })
                .collect();
            (Some(s.text.clone()), terms)
        }
        None => (None, Vec::new()),
    };
    Ok(RunReport {
        format: REPORT_FORMAT.into(),
        config: model.config.clone(),
        fingerprints,
        test_rows: data.rows(),
        stages,
        coxph,
        true_c_index,
        prune_threshold: model.prune_threshold,
        dropped_features: model.dropped_features(),
        formula,
        term_importance,
    })
}

/// C-index of one stage without bootstrapping.
pub fn stage_c_index(model: &ModelFile, stage: Stage, data: &Dataset) -> Result<f64> {
    let data = model.prepare(data)?;
    Ok(concordance_index(&model.network(stage)?.predict(&data.x)?, &data.outcome)?)
}

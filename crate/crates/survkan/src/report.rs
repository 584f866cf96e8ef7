//! Evaluation reports and the CSV logs written next to them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survkan_core::train::{TrainHistory, TrialResult};
use survkan_core::{EvalReport, PruneThreshold, TrainConfig};

use crate::error::{Error, Result};
use crate::io::{read_json, write_file, write_json};
use crate::model::Stage;

pub const REPORT_FORMAT: &str = "survkan-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprints {
    pub train_sha256: String,
    pub test_sha256: String,
    pub model_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    #[serde(flatten)]
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub term: String,
    pub sigma: f64,
}

/// Everything `evaluate` measured. Every number is recomputable from the
/// fingerprinted model and test file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub config: TrainConfig,
    pub fingerprints: Fingerprints,
    pub test_rows: usize,
    pub stages: Vec<StageReport>,
    pub coxph: EvalReport,
    /// C-index of the generating log-hazard, for synthetic data.
    #[serde(default)]
    pub true_c_index: Option<f64>,
    pub prune_threshold: f64,
    pub dropped_features: Vec<String>,
    #[serde(default)]
    pub formula: Option<String>,
    #[serde(default)]
    pub term_importance: Vec<TermReport>,
}

impl RunReport {
    pub fn stage(&self, stage: Stage) -> Option<&EvalReport> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| &s.eval)
    }
}

/// Adds `seconds` under `key` to a `timing.json` in `dir`. Wall-clock
/// numbers live apart from the reports so those stay byte-stable.
pub fn record_timing(dir: &Path, key: &str, seconds: f64) -> Result<()> {
    let path = dir.join("timing.json");
    let mut timing: BTreeMap<String, f64> = if path.exists() { read_json(&path)? } else { BTreeMap::new() };
    timing.insert(key.to_string(), seconds);
    write_json(&path, &timing)
}

fn csv_bytes(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).map_err(Error::csv(path))?;
        for r in rows {
            w.write_record(&r).map_err(Error::csv(path))?;
        }
        w.flush().map_err(Error::io(path))?;
    }
    write_file(path, &out)
}

pub fn write_history(path: &Path, h: &TrainHistory) -> Result<()> {
    let rows = (0..h.loss.len()).map(|s| {
        vec![
            s.to_string(),
            format!("{}", h.loss[s]),
            format!("{}", h.penalty[s]),
            h.val_c_index.get(s).map(|c| format!("{c}")).unwrap_or_default(),
        ]
    });
    csv_bytes(path, &["step", "loss", "penalty", "val_c_index"], rows)
}

fn threshold_text(t: PruneThreshold) -> String {
    match t {
        PruneThreshold::Auto => "auto".into(),
        PruneThreshold::Fixed(v) => format!("{v}"),
    }
}

fn config_row(c: &TrainConfig) -> Vec<String> {
    let hidden: Vec<String> = c.hidden.iter().map(|w| w.to_string()).collect();
    vec![
        format!("{}", c.learning_rate),
        c.grid.to_string(),
        format!("{}", c.lambda),
        format!("{}", c.lambda_ent),
        format!("{}", c.lambda_coef),
        format!("{}", c.xi_b),
        format!("{}", c.xi_s),
        hidden.join("x"),
        format!("{:?}", c.base_kind).to_lowercase(),
        c.early_stopping.to_string(),
        threshold_text(c.prune_threshold),
        c.steps.to_string(),
        c.seed.to_string(),
    ]
}

pub fn write_leaderboard(path: &Path, board: &[TrialResult]) -> Result<()> {
    let header = [
        "trial",
        "learning_rate",
        "grid",
        "lambda",
        "lambda_ent",
        "lambda_coef",
        "xi_b",
        "xi_s",
        "hidden",
        "base_kind",
        "early_stopping",
        "prune_threshold",
        "steps",
        "seed",
        "mean_c",
    ];
    let rows = board.iter().map(|r| {
        let mut row = vec![r.trial.to_string()];
        row.extend(config_row(&r.config));
        row.push(r.mean_c.map(|c| format!("{c}")).unwrap_or_default());
        row
    });
    csv_bytes(path, &header, rows)
}

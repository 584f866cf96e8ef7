//! The `model.json` document: every pipeline stage of one fitted model.

use std::path::Path;

use serde::{Deserialize, Serialize};
use survkan_core::data::ColumnKind;
use survkan_core::symbolic::{EdgeFitReport, FinetuneReport, Formula};
use survkan_core::{apply_standardization, ColumnMeta, CoxPHModel, Dataset, Network, Standardization, TrainConfig};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json, CsvSchema};

pub const MODEL_FORMAT: &str = "survkan-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicStage {
    pub network: Network,
    pub formula: Formula,
    pub text: String,
    pub edges: Vec<EdgeFitReport>,
    #[serde(default)]
    pub finetune: Option<FinetuneReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    /// Training columns, including any standardization applied before
    /// fitting; new data is transformed the same way.
    pub columns: Vec<ColumnMeta>,
    pub config: TrainConfig,
    pub train_sha256: String,
    pub trained: Network,
    pub pruned: Network,
    pub prune_threshold: f64,
    /// Linear baseline fitted on the same rows.
    pub coxph: CoxPHModel,
    #[serde(default)]
    pub symbolic: Option<SymbolicStage>,
}

/// Model stages in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Trained,
    Pruned,
    Symbolic,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Trained => "trained",
            Stage::Pruned => "pruned",
            Stage::Symbolic => "symbolic",
        }
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::StageOrder(format!(
                "no model at {}; run `survkan train` first",
                path.display()
            )));
        }
        let model: ModelFile = read_json(path)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Data(format!("{}: unsupported model format {:?}", path.display(), model.format)));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn network(&self, stage: Stage) -> Result<&Network> {
        match stage {
            Stage::Trained => Ok(&self.trained),
            Stage::Pruned => Ok(&self.pruned),
            Stage::Symbolic => self.symbolic.as_ref().map(|s| &s.network).ok_or_else(|| {
                Error::StageOrder("model has no symbolic stage; run `survkan symbolic` first".into())
            }),
        }
    }

    /// Stages present in the file, in pipeline order.
    pub fn stages(&self) -> Vec<Stage> {
        let mut s = vec![Stage::Trained, Stage::Pruned];
        if self.symbolic.is_some() {
            s.push(Stage::Symbolic);
        }
        s
    }

    /// Names of training columns no longer read by the pruned network.
    pub fn dropped_features(&self) -> Vec<String> {
        let used = self.pruned.used_inputs();
        self.columns.iter().enumerate().filter(|(i, _)| !used.contains(i)).map(|(_, c)| c.name.clone()).collect()
    }

    /// Schema that encodes categories exactly as during training.
    pub fn schema(&self) -> CsvSchema {
        let mut schema = CsvSchema::default();
        for c in &self.columns {
            if let ColumnKind::Categorical { labels } = &c.kind {
                schema.categorical.push(c.name.clone());
                schema.labels.insert(c.name.clone(), labels.clone());
            }
        }
        schema
    }

    /// Checks that `ds` has the training columns and applies the training
    /// standardization.
    pub fn prepare(&self, ds: &Dataset) -> Result<Dataset> {
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let got = ds.names();
        if got.iter().map(String::as_str).ne(names.iter().copied()) {
            return Err(Error::Data(format!("dataset columns {got:?} do not match the model's {names:?}")));
        }
        let stats: Vec<Option<Standardization>> = self.columns.iter().map(|c| c.standardization).collect();
        Ok(apply_standardization(ds, &stats))
    }
}

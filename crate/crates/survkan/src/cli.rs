//! The `survkan` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use survkan_core::symbolic::{EdgeFitReport, Formula};
use survkan_core::{generate, GeneratorSpec, SearchSpace, SyntheticFormula, TrainConfig};

use crate::error::{Error, Result};
use crate::export::export_edge_samples;
use crate::io::{fingerprint, load_dataset, read_json, write_dataset_dir, write_file, write_json, CsvSchema};
use crate::model::{ModelFile, Stage};
use crate::pipeline::{self, SymbolicSettings};
use crate::plot::network_panels;
use crate::report::{record_timing, write_history, write_leaderboard, Fingerprints};

#[derive(Debug, Parser)]
#[command(name = "survkan", version, about = "Interpretable survival models from Kolmogorov-Arnold networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic survival dataset (train.csv, test.csv, meta.json).
    Generate(GenerateArgs),
    /// Train, prune and fit the linear baseline (model.json, history.csv).
    Train(TrainArgs),
    /// Random hyperparameter search with k-fold cross-validation.
    Search(SearchArgs),
    /// C-index with bootstrap intervals for every model stage (report.json).
    Evaluate(EvaluateArgs),
    /// Replace every active edge by a closed form (formula.txt, formula.json).
    Symbolic(SymbolicArgs),
    /// One SVG per active edge.
    Plot(PlotArgs),
}

/// Column naming and categorical encoding of input CSVs.
#[derive(Debug, Clone, Args)]
pub struct SchemaArgs {
    /// Name of the duration column.
    #[arg(long, default_value = "duration")]
    pub duration_column: String,
    /// Name of the event indicator column.
    #[arg(long, default_value = "event")]
    pub event_column: String,
    /// Columns to read as categorical labels (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
}

impl SchemaArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            duration: self.duration_column.clone(),
            event: self.event_column.clone(),
            categorical: self.categorical.clone(),
            ..CsvSchema::default()
        }
    }

    /// The model's categorical encoding plus these column names.
    fn with_model(&self, model: &ModelFile) -> CsvSchema {
        CsvSchema { duration: self.duration_column.clone(), event: self.event_column.clone(), ..model.schema() }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// gaussian, shallow, deep, difficult, linear[:b1,b2,..] or custom:<expr>.
    #[arg(long)]
    pub formula: String,
    #[arg(long, default_value_t = 8000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Uniform noise columns appended after the signal columns.
    #[arg(long, default_value_t = 2)]
    pub noise_features: usize,
    /// Constant baseline hazard.
    #[arg(long, default_value_t = 0.01)]
    pub baseline: f64,
    /// Observe every event time.
    #[arg(long)]
    pub no_censoring: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// TrainConfig as JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for model.json and history.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Z-score continuous columns before training.
    #[arg(long)]
    pub standardize: bool,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// SearchSpace as JSON; missing fields take their defaults.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Overrides the space's fold count.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Directory for leaderboard.csv and best_config.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub standardize: bool,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; defaults to report.json next to the model.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Args)]
pub struct SymbolicArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training data the model was fitted on.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub finetune_steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub finetune_lr: f64,
    /// Significant figures in the rendered formula.
    #[arg(long, default_value_t = 3)]
    pub precision: usize,
    /// Restrict the operator library (comma separated names).
    #[arg(long, value_delimiter = ',')]
    pub operators: Vec<String>,
    /// Also write per-edge (x, y) samples of the pruned network here.
    #[arg(long)]
    pub export_samples: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    /// Directory for the SVG files.
    #[arg(long)]
    pub out: PathBuf,
    /// `pruned` overlays the closed forms when the model has them;
    /// `symbolic` requires them.
    #[arg(long, value_enum, default_value = "pruned")]
    pub stage: Stage,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

/// `formula.json`.
#[derive(Debug, Serialize)]
struct FormulaFile<'a> {
    text: &'a str,
    formula: &'a Formula,
    edges: &'a [EdgeFitReport],
}

fn model_dir(model: &Path) -> PathBuf {
    model.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn timed(dir: &Path, key: &str, start: Instant) -> Result<()> {
    record_timing(dir, key, start.elapsed().as_secs_f64())
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let start = Instant::now();
    let formula = SyntheticFormula::from_name(&a.formula).map_err(|e| Error::Usage(format!("--formula: {e}")))?;
    let spec = GeneratorSpec {
        baseline: a.baseline,
        noise_features: a.noise_features,
        censoring: !a.no_censoring,
        ..GeneratorSpec::new(formula, a.n_train, a.n_test, a.seed)
    };
    let (train, test) = generate(&spec).map_err(|e| match e {
        survkan_core::Error::InvalidArgument(m) => Error::Usage(m),
        other => other.into(),
    })?;
    write_dataset_dir(&a.out, &[("train.csv", &train), ("test.csv", &test)], Some(&spec))?;
    timed(&a.out, "generate", start)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    let data = load_dataset(&a.train, &a.schema.schema())?;
    let (model, history) = pipeline::train_model(&data, &cfg, a.standardize, fingerprint(&a.train)?)?;
    model.save(&a.out.join("model.json"))?;
    write_history(&a.out.join("history.csv"), &history)?;
    log::info!("dropped features: {:?}", model.dropped_features());
    timed(&a.out, "train", start)
}

fn cmd_search(a: &SearchArgs) -> Result<()> {
    let start = Instant::now();
    let mut space: SearchSpace = match &a.space {
        Some(p) => read_json(p)?,
        None => SearchSpace::default(),
    };
    if let Some(k) = a.folds {
        space.folds = k;
    }
    let data = load_dataset(&a.train, &a.schema.schema())?;
    let data = if a.standardize { survkan_core::standardize(&data) } else { data };
    let (best, board) = pipeline::search(&data, &space, a.trials, a.seed, a.jobs)?;
    write_leaderboard(&a.out.join("leaderboard.csv"), &board)?;
    write_json(&a.out.join("best_config.json"), &best)?;
    timed(&a.out, "search", start)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    let model = ModelFile::load(&a.model)?;
    let test = load_dataset(&a.test, &a.schema.with_model(&model))?;
    let fingerprints = Fingerprints {
        train_sha256: model.train_sha256.clone(),
        test_sha256: fingerprint(&a.test)?,
        model_sha256: fingerprint(&a.model)?,
    };
    let report = pipeline::evaluate(&model, &test, a.bootstrap, a.seed, fingerprints)?;
    let out = a.out.clone().unwrap_or_else(|| model_dir(&a.model).join("report.json"));
    write_json(&out, &report)?;
    for s in &report.stages {
        log::info!("{}: C = {:.4} [{:.4}, {:.4}]", s.stage.name(), s.eval.c_index, s.eval.ci_low, s.eval.ci_high);
    }
    timed(&model_dir(&out), "evaluate", start)
}

fn load_training_data(model: &ModelFile, path: &Path, schema: &SchemaArgs) -> Result<survkan_core::Dataset> {
    let data = load_dataset(path, &schema.with_model(model))?;
    if fingerprint(path)? != model.train_sha256 {
        log::warn!("{} is not the file the model was trained on", path.display());
    }
    Ok(data)
}

fn cmd_symbolic(a: &SymbolicArgs) -> Result<()> {
    let start = Instant::now();
    let mut model = ModelFile::load(&a.model)?;
    let train = load_training_data(&model, &a.train, &a.schema)?;
    let mut settings = SymbolicSettings { precision: a.precision, ..SymbolicSettings::default() };
    settings.options.operators = a.operators.clone();
    settings.finetune.steps = a.finetune_steps;
    settings.finetune.learning_rate = a.finetune_lr;
    pipeline::symbolic_stage(&mut model, &train, &settings)?;
    let dir = model_dir(&a.model);
    if let Some(samples) = &a.export_samples {
        let (_, cache) = model.pruned.forward(&model.prepare(&train)?.x)?;
        export_edge_samples(&model.pruned, &cache, samples)?;
    }
    let sym = model.symbolic.as_ref().expect("symbolic stage was just fitted");
    write_file(&dir.join("formula.txt"), format!("{}\n", sym.text).as_bytes())?;
    write_json(&dir.join("formula.json"), &FormulaFile { text: &sym.text, formula: &sym.formula, edges: &sym.edges })?;
    model.save(&a.model)?;
    log::info!("formula: {}", sym.text);
    timed(&dir, "symbolic", start)
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let start = Instant::now();
    let model = ModelFile::load(&a.model)?;
    let train = load_training_data(&model, &a.train, &a.schema)?;
    let (net, overlay) = match a.stage {
        Stage::Trained => (&model.trained, None),
        Stage::Pruned => (&model.pruned, model.symbolic.as_ref().map(|s| &s.network)),
        Stage::Symbolic => (&model.pruned, Some(model.network(Stage::Symbolic)?)),
    };
    let data = model.prepare(&train)?;
    let (_, cache) = net.forward(&data.x)?;
    for (stem, svg) in network_panels(net, &cache, overlay, &data.names()) {
        write_file(&a.out.join(format!("{stem}.svg")), svg.as_bytes())?;
    }
    timed(&model_dir(&a.model), "plot", start)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Search(a) => cmd_search(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Symbolic(a) => cmd_symbolic(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

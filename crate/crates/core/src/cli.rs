//! The `cmqe` batch command.
//!
//! All data files are newline-delimited JSON joined strictly on `id`.
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
//! Outputs are written through a temporary file and renamed into place, so
//! a failing command leaves nothing behind.

use std::collections::{HashMap, HashSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{derive_targets, parse_dataset, parse_tagged, DatasetRecord, TaggedSentence, Task, TaskTarget};
use crate::error::{DataError, Error, Result};
use crate::eval::{evaluate, round_clip, EvalReport, F1Average};
use crate::features::{
    assemble_features, fit_scaler, parse_features, FeatureError, FeatureLayout, FeatureRecord, FeatureVector,
    ScalerParams,
};
use crate::jsonl;
use crate::metrics::{metric_vector, MetricVector};
use crate::regressor::{
    grid_search, init_model, load_model, save_model, train, GridSpec, MlpConfig, MlpModel, RegressorError,
    TrainReport,
};

#[derive(Debug, Parser)]
#[command(name = "cmqe", version, about = "Quality estimation for synthetic code-mixed sentences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute code-mixing metrics for every tagged sentence.
    Metrics {
        #[arg(long)]
        tagged: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the scaler and train a regressor for one task.
    Train {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        model_out: PathBuf,
        /// Write the training report (per-epoch loss, learning rates) here.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Write the assembled model inputs (id + values per line) here.
        #[arg(long)]
        dump_features: Option<PathBuf>,
        #[command(flatten)]
        mlp: MlpOverrides,
    },
    /// Predict with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        tagged: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions file against the dataset ratings.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: Task,
        #[arg(long, value_parser = parse_average, default_value = "weighted")]
        f1_average: F1Average,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select a learning rate (and optionally hidden sizes) by validation MSE.
    Gridsearch {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated learning rates.
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.001, 0.0001])]
        lr_grid: Vec<f64>,
        /// Also search hidden sizes over {10,100,1000} per layer.
        #[arg(long)]
        grid_hidden: bool,
        #[command(flatten)]
        mlp: MlpOverrides,
    },
}

#[derive(Debug, Args)]
pub struct Inputs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub tagged: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
}

#[derive(Debug, Args, Default)]
pub struct MlpOverrides {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Comma-separated hidden layer sizes, e.g. 1000,100,10.
    #[arg(long, value_delimiter = ',')]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

impl MlpOverrides {
    pub fn config(&self, input_dim: usize) -> MlpConfig {
        let mut c = MlpConfig::new(input_dim);
        c.seed = self.seed;
        if let Some(lr) = self.lr {
            c.learning_rate = lr;
        }
        if let Some(h) = &self.hidden_dims {
            c.hidden_dims = h.clone();
        }
        if self.batch_size.is_some() {
            c.batch_size = self.batch_size;
        }
        if let Some(e) = self.max_epochs {
            c.max_epochs = e;
        }
        c
    }
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse()
}

fn parse_average(s: &str) -> std::result::Result<F1Average, String> {
    s.parse()
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub raw: f64,
    pub rounded: i64,
}

/// One line of a grid-search table. `val_mse` is `null` for diverged points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub learning_rate: f64,
    pub hidden_dims: Vec<usize>,
    pub val_mse: Option<f64>,
    pub selected: bool,
}

/// Dataset, tagged sentences and feature records aligned by dataset order.
#[derive(Debug, Clone)]
pub struct Joined {
    pub records: Vec<DatasetRecord>,
    pub metrics: Vec<MetricVector>,
    pub features: Vec<FeatureRecord>,
    pub embedding_dim: usize,
}

/// Aligns the three inputs on `id`. Every dataset id must appear in the
/// other two files and vice versa.
pub fn join_inputs(
    records: Vec<DatasetRecord>,
    tagged: Vec<TaggedSentence>,
    features: Vec<FeatureRecord>,
    embedding_dim: usize,
) -> Result<Joined> {
    let dataset_ids: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let missing = |id: &str, what: &str| DataError::MissingId {
        id: id.to_string(),
        what: what.to_string(),
    };
    for s in &tagged {
        if !dataset_ids.contains(s.id.as_str()) {
            return Err(missing(&s.id, "the dataset file (present in tagged file)").into());
        }
    }
    for f in &features {
        if !dataset_ids.contains(f.id.as_str()) {
            return Err(missing(&f.id, "the dataset file (present in features file)").into());
        }
    }
    let mut tagged: HashMap<String, TaggedSentence> = tagged.into_iter().map(|s| (s.id.clone(), s)).collect();
    let mut feats: HashMap<String, FeatureRecord> = features.into_iter().map(|f| (f.id.clone(), f)).collect();
    let mut metrics = Vec::with_capacity(records.len());
    let mut aligned = Vec::with_capacity(records.len());
    for r in &records {
        let s = tagged.remove(&r.id).ok_or_else(|| missing(&r.id, "the tagged file"))?;
        let f = feats.remove(&r.id).ok_or_else(|| missing(&r.id, "the features file"))?;
        metrics.push(metric_vector(&s));
        aligned.push(f);
    }
    Ok(Joined {
        records,
        metrics,
        features: aligned,
        embedding_dim,
    })
}

pub fn load_inputs(dataset: &Path, tagged: &Path, features: &Path) -> Result<Joined> {
    let records = parse_dataset(dataset)?;
    let sentences = parse_tagged(tagged)?;
    let file = parse_features(features)?;
    join_inputs(records, sentences, file.records, file.header.embedding_dim)
}

impl Joined {
    pub fn targets(&self) -> Vec<TaskTarget> {
        self.records.iter().map(derive_targets).collect()
    }

    pub fn assemble(&self, scaler: &ScalerParams, layout: &FeatureLayout) -> Result<Vec<FeatureVector>> {
        if self.embedding_dim != layout.embedding_dim {
            return Err(FeatureError::DimensionMismatch {
                id: "<features header>".into(),
                segment: "embedding_dim".into(),
                expected: layout.embedding_dim,
                found: self.embedding_dim,
            }
            .into());
        }
        self.metrics
            .iter()
            .zip(&self.features)
            .map(|(mv, fr)| {
                let fv = assemble_features(mv, fr, scaler)?;
                layout.check(&fv)?;
                Ok(fv)
            })
            .collect()
    }

    /// Scaler fitted on all joined metrics, assembled vectors and task targets.
    pub fn training_set(&self, task: Task) -> Result<(ScalerParams, FeatureLayout, Vec<(Vec<f64>, f64)>)> {
        let scaler = fit_scaler(&self.metrics)?;
        let layout = FeatureLayout::new(self.embedding_dim);
        let vectors = self.assemble(&scaler, &layout)?;
        let data = vectors
            .into_iter()
            .zip(self.targets())
            .map(|(fv, t)| (fv.values, f64::from(t.get(task))))
            .collect();
        Ok((scaler, layout, data))
    }
}

/// Library form of `cmqe train`.
pub fn train_model(joined: &Joined, task: Task, overrides: &MlpOverrides) -> Result<(MlpModel, TrainReport)> {
    let (scaler, layout, data) = joined.training_set(task)?;
    let config = overrides.config(layout.dim());
    let (mut model, report) = train(init_model(&config)?, &data)?;
    model.scaler = Some(scaler);
    model.layout = Some(layout);
    model.task = Some(task);
    Ok((model, report))
}

/// Library form of `cmqe predict`.
pub fn predict(model: &MlpModel, joined: &Joined) -> Result<Vec<PredictionRecord>> {
    let (Some(scaler), Some(layout)) = (&model.scaler, &model.layout) else {
        return Err(crate::regressor::ModelFileError::Invalid("model carries no scaler/feature layout".into()).into());
    };
    let task = model
        .task
        .ok_or_else(|| crate::regressor::ModelFileError::Invalid("model carries no task".into()))?;
    let vectors = joined.assemble(scaler, layout)?;
    vectors
        .iter()
        .map(|fv| {
            let raw = model.forward(&fv.values)?;
            let rounded = round_clip(raw, task).map_err(|_| {
                Error::Eval(crate::eval::EvalError::NonFinitePrediction {
                    id: fv.id.clone(),
                    value: raw,
                })
            })?;
            Ok(PredictionRecord {
                id: fv.id.clone(),
                raw,
                rounded,
            })
        })
        .collect()
}

pub fn parse_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    jsonl::read_lines(path)?
        .into_iter()
        .map(|(line, text)| Ok(jsonl::parse_line(path, line, &text)?))
        .collect()
}

/// Library form of `cmqe evaluate`.
pub fn evaluate_predictions(
    predictions: &[PredictionRecord],
    records: &[DatasetRecord],
    task: Task,
    averaging: F1Average,
) -> Result<EvalReport> {
    let gold: Vec<(String, i64)> = records
        .iter()
        .map(|r| (r.id.clone(), i64::from(derive_targets(r).get(task))))
        .collect();
    let preds: Vec<(String, f64)> = predictions.iter().map(|p| (p.id.clone(), p.raw)).collect();
    Ok(evaluate(&gold, &preds, task, averaging)?)
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report serializes")
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Metrics { tagged, out } => {
            let sentences = parse_tagged(&tagged)?;
            let vectors: Vec<MetricVector> = sentences.iter().map(metric_vector).collect();
            jsonl::write_atomic(&out, |w| jsonl::write_records(&vectors, w))?;
        }
        Command::Train {
            inputs,
            model_out,
            report_out,
            dump_features,
            mlp,
        } => {
            let joined = load_inputs(&inputs.dataset, &inputs.tagged, &inputs.features)?;
            let (model, report) = train_model(&joined, inputs.task, &mlp)?;
            if let Some(path) = &dump_features {
                let (scaler, layout) = (model.scaler.as_ref().unwrap(), model.layout.as_ref().unwrap());
                let vectors = joined.assemble(scaler, layout)?;
                jsonl::write_atomic(path, |w| jsonl::write_records(&vectors, w))?;
            }
            save_model(&model, &model_out)?;
            let text = json_line(&report);
            if let Some(path) = &report_out {
                jsonl::write_atomic(path, |w| writeln!(w, "{text}"))?;
            }
            println!("{text}");
        }
        Command::Predict {
            model,
            dataset,
            tagged,
            features,
            out,
        } => {
            let model = load_model(&model)?;
            let joined = load_inputs(&dataset, &tagged, &features)?;
            let preds = predict(&model, &joined)?;
            jsonl::write_atomic(&out, |w| jsonl::write_records(&preds, w))?;
        }
        Command::Evaluate {
            predictions,
            dataset,
            task,
            f1_average,
            out,
        } => {
            let preds = parse_predictions(&predictions)?;
            let records = parse_dataset(&dataset)?;
            let report = evaluate_predictions(&preds, &records, task, f1_average)?;
            let text = json_line(&report);
            if let Some(path) = &out {
                jsonl::write_atomic(path, |w| writeln!(w, "{text}"))?;
            }
            println!("{text}");
        }
        Command::Gridsearch {
            inputs,
            out,
            lr_grid,
            grid_hidden,
            mlp,
        } => {
            let joined = load_inputs(&inputs.dataset, &inputs.tagged, &inputs.features)?;
            let (_, layout, data) = joined.training_set(inputs.task)?;
            let mut config = mlp.config(layout.dim());
            config.lr_grid = lr_grid;
            config.validate()?;
            let spec = if grid_hidden {
                GridSpec::with_hidden_search(&config)
            } else {
                GridSpec::learning_rates_only(&config)
            };
            let result = grid_search(&data, &config, &spec)?;
            let rows: Vec<GridRow> = result
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| GridRow {
                    learning_rate: p.learning_rate,
                    hidden_dims: p.hidden_dims.clone(),
                    val_mse: p.val_mse.is_finite().then_some(p.val_mse),
                    selected: i == result.selected,
                })
                .collect();
            jsonl::write_atomic(&out, |w| jsonl::write_records(&rows, w))?;
            println!("{}", json_line(&rows[result.selected]));
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cmqe: {e}");
            match e {
                Error::Regressor(RegressorError::InvalidConfig(_)) => 1,
                other => other.exit_code(),
            }
        }
    }
}

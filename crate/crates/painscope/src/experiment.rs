//! Experiment orchestration: resolves run options from presets, an optional
//! config file, and explicit flags, then drives data generation, training,
//! sweeps, evaluation, calibration audits, attribution exports, and report
//! assembly, writing every artifact under a single output directory.
//!
//! Reproducibility contract: artifacts depend only on the resolved options
//! and the seed. Wall-clock timestamps go to `run.log` and nowhere else, so
//! two runs with identical options produce byte-identical artifacts apart
//! from that sidecar.

use crate::attribution::{export_attribution, grad_cam, integrated_gradients, AttributionMethod};
use crate::data::{
    generate_synthetic, load_manifest, make_folds, save_dataset, AugmentationConfig, Sample,
};
use crate::error::{Error, Result};
use crate::labels::{ClassLabel, LabelMode};
use crate::metrics::{
    calibration_curve, classification_metrics, confidence_histogram, histogram_to_csv,
    paired_t_test, ClassificationMetrics, PredictionRecord, TTestResult,
};
use crate::model::{load_checkpoint, save_checkpoint, CheckpointMetadata, Model, ModelConfig};
use crate::training::{
    history_lines, sweep as run_sweep, train_all, OptimizerKind, SchedulerKind, SweepParameter,
    SweepResult, TrainConfig,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable consulted for the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PAINSCOPE_OUT";

/// Fallback output directory when neither flag nor environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "painscope-out";

/// Named bundles of training hyperparameters.
///
/// `original` is the baseline protocol: learning rate 1e-4, 100 epochs,
/// batches of 16, RMSProp, constant learning rate, hard labels. `tuned`
/// keeps that but trains 120 epochs with smoothing 0.3 under cosine
/// annealing. `custom` starts from the original values and takes every
/// override as given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Original,
    Tuned,
    Custom,
}

impl Preset {
    /// The training configuration this preset stands for, before overrides.
    pub fn train_config(self, seed: u64) -> TrainConfig {
        let base = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        match self {
            Preset::Original | Preset::Custom => base,
            Preset::Tuned => TrainConfig {
                epochs: 120,
                label_mode: LabelMode::Lsr { epsilon: 0.3 },
                scheduler: SchedulerKind::CosineAnnealing,
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Original => "original",
            Preset::Tuned => "tuned",
            Preset::Custom => "custom",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Preset::Original),
            "tuned" => Ok(Preset::Tuned),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Config(format!(
                "preset {other:?} is not \"original\", \"tuned\", or \"custom\""
            ))),
        }
    }
}

/// Network capacity tiers. `full` is the reference three-branch network on
/// 120-pixel inputs; `compact` and `tiny` shrink filters and default input
/// size so the whole pipeline rehearses quickly on one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSize {
    Full,
    Compact,
    Tiny,
}

impl ModelSize {
    /// Default input side length for the tier.
    pub fn default_input_size(self) -> usize {
        match self {
            ModelSize::Full => 120,
            ModelSize::Compact => 24,
            ModelSize::Tiny => 16,
        }
    }

    /// Full model configuration for the tier at the given input geometry.
    pub fn config(self, input_size: usize, input_channels: usize) -> ModelConfig {
        let reference = ModelConfig::default();
        let (wide, narrow, last) = match self {
            ModelSize::Full => (64, 32, 64),
            ModelSize::Compact => (16, 8, 16),
            ModelSize::Tiny => (4, 2, 4),
        };
        ModelConfig {
            input_size,
            input_channels,
            wide_filters: wide,
            narrow_filters: narrow,
            last_conv_filters: last,
            ..reference
        }
    }
}

impl fmt::Display for ModelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelSize::Full => "full",
            ModelSize::Compact => "compact",
            ModelSize::Tiny => "tiny",
        })
    }
}

impl FromStr for ModelSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelSize::Full),
            "compact" => Ok(ModelSize::Compact),
            "tiny" => Ok(ModelSize::Tiny),
            other => Err(Error::Config(format!(
                "model size {other:?} is not \"full\", \"compact\", or \"tiny\""
            ))),
        }
    }
}

/// Where samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Synthetic { subjects: usize, per_subject: usize },
    Manifest { path: PathBuf },
}

/// Option set mirroring the command-line flags, with every field optional.
/// A config file deserializes into this shape; explicit flags overlay it.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// `"synthetic"` or a manifest path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subjects: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_subject: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<String>,
    /// `"hard"`, `"nfcs"`, or a smoothing epsilon such as `"0.3"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel_folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_size: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    /// Augmented copies generated per training image; 0 disables.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Reads an overrides file (JSON object with the fields above).
    pub fn from_file(path: &Path) -> Result<Overrides> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            details: format!("config file: {e}"),
        })
    }

    /// Overlays `other` on `self`; set fields in `other` win.
    pub fn overlay(mut self, other: Overrides) -> Overrides {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            data, subjects, per_subject, image_size, channels, preset, learning_rate, epochs,
            batch_size, optimizer, scheduler, labels, folds, parallel_folds, model_size, dropout,
            augment_count, seed, out
        );
        self
    }

    /// Resolves defaults, the preset, and overrides into concrete options.
    ///
    /// Precedence, lowest to highest: built-in defaults, preset values,
    /// then whatever fields are set here (a config file already overlaid
    /// with explicit flags).
    pub fn resolve(&self) -> Result<RunOptions> {
        let preset = match &self.preset {
            Some(text) => text.parse::<Preset>()?,
            None => Preset::Custom,
        };
        let seed = self.seed.unwrap_or(0);
        let mut train = preset.train_config(seed);
        if let Some(lr) = self.learning_rate {
            train.learning_rate = lr;
        }
        if let Some(epochs) = self.epochs {
            train.epochs = epochs;
        }
        if let Some(batch) = self.batch_size {
            train.batch_size = batch;
        }
        if let Some(text) = &self.optimizer {
            train.optimizer = text.parse::<OptimizerKind>()?;
        }
        if let Some(text) = &self.scheduler {
            train.scheduler = text.parse::<SchedulerKind>()?;
        }
        if let Some(text) = &self.labels {
            train.label_mode = text.parse::<LabelMode>()?;
        }
        train.validate()?;

        let model_size = match &self.model_size {
            Some(text) => text.parse::<ModelSize>()?,
            None => ModelSize::Full,
        };
        let input_size = self.image_size.unwrap_or(model_size.default_input_size());
        let channels = self.channels.unwrap_or(1);
        let model = model_size.config(input_size, channels);
        let model = ModelConfig {
            dropout_rate: self.dropout.unwrap_or(model.dropout_rate),
            ..model
        };
        model.validate()?;

        let data = match self.data.as_deref() {
            None | Some("synthetic") => DataSource::Synthetic {
                subjects: self.subjects.unwrap_or(30),
                per_subject: self.per_subject.unwrap_or(12),
            },
            Some(path) => DataSource::Manifest {
                path: PathBuf::from(path),
            },
        };

        let out = match &self.out {
            Some(path) => path.clone(),
            None => match std::env::var_os(OUTPUT_DIR_ENV) {
                Some(dir) => PathBuf::from(dir),
                None => PathBuf::from(DEFAULT_OUTPUT_DIR),
            },
        };

        Ok(RunOptions {
            data,
            preset,
            train,
            model,
            model_size,
            folds: self.folds.unwrap_or(10),
            parallel_folds: self.parallel_folds.unwrap_or(1).max(1),
            augment_count: self.augment_count.unwrap_or(20),
            seed,
            out,
            flags: self.clone(),
        })
    }
}

/// Fully resolved options for one command invocation.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub data: DataSource,
    pub preset: Preset,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub model_size: ModelSize,
    pub folds: usize,
    pub parallel_folds: usize,
    pub augment_count: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// The merged overrides these options were resolved from; echoed into
    /// the run manifest so a run can be repeated via `--config`.
    pub flags: Overrides,
}

impl RunOptions {
    fn augmentation(&self) -> Option<AugmentationConfig> {
        if self.augment_count == 0 {
            None
        } else {
            Some(AugmentationConfig {
                count: self.augment_count,
                ..AugmentationConfig::default()
            })
        }
    }

    /// Loads or generates the sample set at the given input geometry.
    pub fn load_samples_for(&self, model: &ModelConfig) -> Result<Vec<Sample>> {
        match &self.data {
            DataSource::Synthetic {
                subjects,
                per_subject,
            } => {
                if model.input_channels != 1 {
                    return Err(Error::Config(
                        "synthetic data is single-channel; pass a manifest for multi-channel input"
                            .into(),
                    ));
                }
                generate_synthetic(*subjects, *per_subject, model.input_size, self.seed)
            }
            DataSource::Manifest { path } => {
                load_manifest(path, model.input_size, model.input_channels)
            }
        }
    }
}

/// Human-readable training summary echoed into run manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: String,
    pub scheduler: String,
    pub labels: String,
}

impl TrainSummary {
    fn from_config(config: &TrainConfig) -> TrainSummary {
        TrainSummary {
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            batch_size: config.batch_size,
            optimizer: config.optimizer.to_string(),
            scheduler: config.scheduler.to_string(),
            labels: config.label_mode.to_string(),
        }
    }
}

/// Record of one command invocation; everything needed to repeat the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub preset: String,
    pub data: DataSource,
    pub train: TrainSummary,
    pub model: ModelConfig,
    pub model_size: String,
    pub folds: usize,
    pub parallel_folds: usize,
    pub augment_count: usize,
    /// Merged flag set; feed back via `--config` to repeat the run. The
    /// output directory is omitted so manifests are location-independent;
    /// a replay picks its own.
    pub flags: Overrides,
    /// Command-specific inputs (sweep candidates, checkpoint paths, ...).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

/// Writes the run manifest and appends a timestamped line to the sidecar
/// log. The manifest carries no timestamps so reruns stay byte-identical.
pub fn write_run_manifest(
    opts: &RunOptions,
    command: &str,
    extra: Option<serde_json::Value>,
) -> Result<PathBuf> {
    fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;
    let mut flags = opts.flags.clone();
    flags.out = None;
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.seed,
        preset: opts.preset.to_string(),
        data: opts.data.clone(),
        train: TrainSummary::from_config(&opts.train),
        model: opts.model.clone(),
        model_size: opts.model_size.to_string(),
        folds: opts.folds,
        parallel_folds: opts.parallel_folds,
        augment_count: opts.augment_count,
        flags,
        extra,
    };
    let path = opts.out.join("run_manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    append_log(&opts.out, command)?;
    Ok(path)
}

/// Appends `unix_seconds command` to `run.log`, the only artifact allowed
/// to differ between identical runs.
fn append_log(dir: &Path, command: &str) -> Result<()> {
    use std::io::Write;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let path = dir.join("run.log");
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    writeln!(file, "{stamp} {command}").map_err(|e| Error::io(&path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types always serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Generates a synthetic dataset on disk and returns the manifest path.
pub fn cmd_generate_data(opts: &RunOptions) -> Result<PathBuf> {
    let samples = match &opts.data {
        DataSource::Synthetic { .. } => opts.load_samples_for(&opts.model)?,
        DataSource::Manifest { .. } => {
            return Err(Error::Config(
                "generate-data produces synthetic sets; it cannot take a manifest as input".into(),
            ))
        }
    };
    write_run_manifest(opts, "generate-data", None)?;
    save_dataset(&samples, &opts.out)
}

/// Per-fold training summary returned by [`cmd_train`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub best_epoch: usize,
    pub best_test_loss: f64,
    pub metrics: ClassificationMetrics,
    /// Checkpoint file name, relative to the run directory.
    pub checkpoint: PathBuf,
}

/// Training artifacts summary: per-fold reports plus pooled metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub folds: Vec<FoldReport>,
    pub pooled: ClassificationMetrics,
    pub mean_f1: f64,
}

fn predictions_csv(records: &[PredictionRecord]) -> String {
    let mut csv = String::from("fold,subject_id,true_label,confidence_pain\n");
    for record in records {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            record.fold, record.subject_id, record.true_label, record.confidence_pain
        ));
    }
    csv
}

/// Trains one model per fold, writing a checkpoint, an epoch-history JSONL
/// file, pooled held-out predictions, and a metrics summary.
pub fn cmd_train(opts: &RunOptions) -> Result<TrainReport> {
    let samples = opts.load_samples_for(&opts.model)?;
    let plan = make_folds(&samples, opts.folds, opts.seed)?;
    let outcomes = train_all(
        &opts.model,
        &samples,
        &plan,
        &opts.train,
        opts.augmentation().as_ref(),
        opts.parallel_folds,
    )?;
    write_run_manifest(opts, "train", None)?;

    let mut fold_reports = Vec::new();
    let mut pooled_records = Vec::new();
    for outcome in &outcomes {
        let checkpoint_name = format!("fold_{:02}.ckpt", outcome.fold);
        save_checkpoint(&outcome.model, &opts.out.join(&checkpoint_name), &outcome.metadata)?;
        let history_path = opts.out.join(format!("fold_{:02}.history.jsonl", outcome.fold));
        write_text(&history_path, &history_lines(&outcome.history))?;
        fold_reports.push(FoldReport {
            fold: outcome.fold,
            best_epoch: outcome.metadata.epoch,
            best_test_loss: outcome.metadata.test_loss,
            metrics: classification_metrics(&outcome.predictions)?,
            checkpoint: PathBuf::from(checkpoint_name),
        });
        pooled_records.extend(outcome.predictions.iter().cloned());
    }
    let pooled = classification_metrics(&pooled_records)?;
    let mean_f1 =
        fold_reports.iter().map(|r| r.metrics.f1).sum::<f64>() / fold_reports.len() as f64;
    let report = TrainReport {
        folds: fold_reports,
        pooled,
        mean_f1,
    };
    write_text(&opts.out.join("predictions.csv"), &predictions_csv(&pooled_records))?;
    write_json(&opts.out.join("metrics.json"), &report)?;
    Ok(report)
}

/// One-at-a-time hyperparameter search; writes the result table as JSON
/// and CSV.
pub fn cmd_sweep(
    opts: &RunOptions,
    parameter: SweepParameter,
    candidates: &[String],
) -> Result<SweepResult> {
    let samples = opts.load_samples_for(&opts.model)?;
    let plan = make_folds(&samples, opts.folds, opts.seed)?;
    let result = run_sweep(
        &opts.model,
        &samples,
        &plan,
        &opts.train,
        parameter,
        candidates,
        opts.augmentation().as_ref(),
        opts.parallel_folds,
    )?;
    write_run_manifest(
        opts,
        "sweep",
        Some(serde_json::json!({
            "hyperparameter": parameter.to_string(),
            "candidates": candidates,
        })),
    )?;
    write_json(&opts.out.join("sweep_result.json"), &result)?;

    let mut csv = String::from("candidate,mean_f1,delta_f1,selected\n");
    for candidate in &result.candidates {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            candidate.value,
            candidate.mean_f1,
            candidate.delta_f1,
            if candidate.value == result.selected { "yes" } else { "no" }
        ));
    }
    write_text(&opts.out.join("sweep_table.csv"), &csv)?;
    Ok(result)
}

/// A checkpoint set loaded back from disk, sorted by fold.
pub struct CheckpointSet {
    pub entries: Vec<(Model, CheckpointMetadata)>,
    pub dir: PathBuf,
}

/// Loads every `fold_*.ckpt` under `dir`. All checkpoints must share one
/// model configuration and one seed.
pub fn load_checkpoint_set(dir: &Path) -> Result<CheckpointSet> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| {
            path.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("fold_") && n.ends_with(".ckpt"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no fold_*.ckpt checkpoints under {}",
            dir.display()
        )));
    }
    let mut entries = Vec::with_capacity(paths.len());
    for path in &paths {
        entries.push(load_checkpoint(path)?);
    }
    entries.sort_by_key(|(_, meta)| meta.fold);
    let (first_model, first_meta) = &entries[0];
    for (model, meta) in &entries[1..] {
        if model.config() != first_model.config() {
            return Err(Error::Config(format!(
                "checkpoints under {} mix model configurations",
                dir.display()
            )));
        }
        if meta.seed != first_meta.seed {
            return Err(Error::Config(format!(
                "checkpoints under {} mix seeds {} and {}",
                dir.display(),
                first_meta.seed,
                meta.seed
            )));
        }
    }
    Ok(CheckpointSet {
        entries,
        dir: dir.to_path_buf(),
    })
}

/// Held-out predictions for every checkpoint in the set, pooled in fold
/// order. The fold plan is rebuilt from the checkpoints' own seed, so the
/// split matches training exactly when the data flags match.
pub fn checkpoint_predictions(
    opts: &RunOptions,
    set: &CheckpointSet,
) -> Result<Vec<PredictionRecord>> {
    let config = set.entries[0].0.config().clone();
    let samples = opts.load_samples_for(&config)?;
    let plan = make_folds(&samples, opts.folds, set.entries[0].1.seed)?;
    let mut records = Vec::new();
    for (model, meta) in &set.entries {
        let (_, test) = plan.split(meta.fold, &samples);
        if test.is_empty() {
            return Err(Error::Config(format!(
                "fold {} has no held-out samples; do the data flags match training?",
                meta.fold
            )));
        }
        for sample in test {
            let dist = model.predict(&sample.image)?;
            records.push(PredictionRecord {
                confidence_pain: dist.p_pain,
                true_label: sample.hard_label,
                fold: meta.fold,
                subject_id: sample.subject_id.clone(),
            });
        }
    }
    Ok(records)
}

fn per_fold_metrics(records: &[PredictionRecord]) -> Result<Vec<(usize, ClassificationMetrics)>> {
    let mut folds: Vec<usize> = records.iter().map(|r| r.fold).collect();
    folds.sort_unstable();
    folds.dedup();
    folds
        .into_iter()
        .map(|fold| {
            let subset: Vec<PredictionRecord> = records
                .iter()
                .filter(|r| r.fold == fold)
                .cloned()
                .collect();
            Ok((fold, classification_metrics(&subset)?))
        })
        .collect()
}

/// Side-by-side metric comparison between two checkpoint sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub primary: EvaluationSide,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<EvaluationSide>,
    /// Pooled-metric differences, primary minus baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<MetricDelta>,
    /// Paired two-tailed t-test over per-fold F1 scores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_t_test: Option<TTestResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSide {
    pub checkpoints: PathBuf,
    pub pooled: ClassificationMetrics,
    pub per_fold: Vec<FoldMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub metrics: ClassificationMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricDelta {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

fn evaluation_side(opts: &RunOptions, dir: &Path) -> Result<(EvaluationSide, Vec<f64>)> {
    let set = load_checkpoint_set(dir)?;
    let records = checkpoint_predictions(opts, &set)?;
    let pooled = classification_metrics(&records)?;
    let per_fold = per_fold_metrics(&records)?;
    let f1_by_fold: Vec<f64> = per_fold.iter().map(|(_, m)| m.f1).collect();
    Ok((
        EvaluationSide {
            checkpoints: dir.to_path_buf(),
            pooled,
            per_fold: per_fold
                .into_iter()
                .map(|(fold, metrics)| FoldMetrics { fold, metrics })
                .collect(),
        },
        f1_by_fold,
    ))
}

fn metrics_table_csv(evaluation: &Evaluation) -> String {
    let mut csv = String::from("metric,primary");
    if evaluation.baseline.is_some() {
        csv.push_str(",baseline,delta");
    }
    csv.push('\n');
    let rows: [(&str, fn(&ClassificationMetrics) -> f64); 4] = [
        ("accuracy", |m| m.accuracy),
        ("f1", |m| m.f1),
        ("precision", |m| m.precision),
        ("recall", |m| m.recall),
    ];
    for (name, get) in rows {
        csv.push_str(&format!("{name},{}", get(&evaluation.primary.pooled)));
        if let Some(baseline) = &evaluation.baseline {
            let delta = get(&evaluation.primary.pooled) - get(&baseline.pooled);
            csv.push_str(&format!(",{},{}", get(&baseline.pooled), delta));
        }
        csv.push('\n');
    }
    csv
}

/// Evaluates a checkpoint set (optionally against a second set) and writes
/// `evaluation.json` plus `metrics_table.csv`.
pub fn cmd_evaluate(
    opts: &RunOptions,
    checkpoints: &Path,
    against: Option<&Path>,
) -> Result<Evaluation> {
    let (primary, primary_f1) = evaluation_side(opts, checkpoints)?;
    let mut evaluation = Evaluation {
        primary,
        baseline: None,
        delta: None,
        f1_t_test: None,
    };
    if let Some(baseline_dir) = against {
        let (baseline, baseline_f1) = evaluation_side(opts, baseline_dir)?;
        evaluation.delta = Some(MetricDelta {
            accuracy: evaluation.primary.pooled.accuracy - baseline.pooled.accuracy,
            f1: evaluation.primary.pooled.f1 - baseline.pooled.f1,
            precision: evaluation.primary.pooled.precision - baseline.pooled.precision,
            recall: evaluation.primary.pooled.recall - baseline.pooled.recall,
        });
        evaluation.f1_t_test = Some(paired_t_test(&primary_f1, &baseline_f1)?);
        evaluation.baseline = Some(baseline);
    }
    write_run_manifest(
        opts,
        "evaluate",
        Some(serde_json::json!({
            "checkpoints": checkpoints,
            "against": against,
        })),
    )?;
    write_json(&opts.out.join("evaluation.json"), &evaluation)?;
    write_text(&opts.out.join("metrics_table.csv"), &metrics_table_csv(&evaluation))?;
    Ok(evaluation)
}

/// Calibration audit artifacts: pooled reliability bins, the expected
/// calibration error, per-fold ECE, and a confidence histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub ece: f64,
    pub bin_count: usize,
    pub per_fold_ece: Vec<FoldEce>,
    pub record_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldEce {
    pub fold: usize,
    pub ece: f64,
}

/// Audits checkpoint confidence against held-out outcomes; writes the
/// report JSON plus curve and histogram CSVs.
pub fn cmd_calibrate(opts: &RunOptions, checkpoints: &Path, bins: usize) -> Result<CalibrationSummary> {
    let set = load_checkpoint_set(checkpoints)?;
    let records = checkpoint_predictions(opts, &set)?;
    let report = calibration_curve(&records, bins)?;

    let mut folds: Vec<usize> = records.iter().map(|r| r.fold).collect();
    folds.sort_unstable();
    folds.dedup();
    let mut per_fold_ece = Vec::new();
    for fold in folds {
        let subset: Vec<PredictionRecord> =
            records.iter().filter(|r| r.fold == fold).cloned().collect();
        let fold_report = calibration_curve(&subset, bins)?;
        per_fold_ece.push(FoldEce {
            fold,
            ece: fold_report.ece,
        });
    }

    write_run_manifest(
        opts,
        "calibrate",
        Some(serde_json::json!({
            "checkpoints": checkpoints,
            "bins": bins,
        })),
    )?;
    let summary = CalibrationSummary {
        ece: report.ece,
        bin_count: report.bin_count,
        per_fold_ece,
        record_count: records.len(),
    };
    #[derive(Serialize)]
    struct FullReport<'a> {
        #[serde(flatten)]
        summary: &'a CalibrationSummary,
        bins: &'a [crate::metrics::CalibrationBin],
    }
    write_json(
        &opts.out.join("calibration_report.json"),
        &FullReport {
            summary: &summary,
            bins: &report.bins,
        },
    )?;
    write_text(&opts.out.join("calibration_curve.csv"), &report.to_csv())?;
    let histogram = confidence_histogram(&records, bins)?;
    write_text(
        &opts.out.join("confidence_histogram.csv"),
        &histogram_to_csv(&histogram),
    )?;
    Ok(summary)
}

/// Which attribution methods `cmd_explain` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    GradCam,
    IntegratedGradients,
    Both,
}

impl MethodChoice {
    fn methods(self) -> &'static [AttributionMethod] {
        match self {
            MethodChoice::GradCam => &[AttributionMethod::GradCam],
            MethodChoice::IntegratedGradients => &[AttributionMethod::IntegratedGradients],
            MethodChoice::Both => &[
                AttributionMethod::GradCam,
                AttributionMethod::IntegratedGradients,
            ],
        }
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodChoice::GradCam => "grad_cam",
            MethodChoice::IntegratedGradients => "integrated_gradients",
            MethodChoice::Both => "both",
        })
    }
}

impl FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad_cam" => Ok(MethodChoice::GradCam),
            "integrated_gradients" => Ok(MethodChoice::IntegratedGradients),
            "both" => Ok(MethodChoice::Both),
            other => Err(Error::Config(format!(
                "method {other:?} is not \"grad_cam\", \"integrated_gradients\", or \"both\""
            ))),
        }
    }
}

/// Index entry for one explained image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Explanation {
    pub fold: usize,
    pub sample: usize,
    pub subject_id: String,
    pub predicted: ClassLabel,
    pub confidence: f64,
    /// Written file names, relative to the run directory.
    pub files: Vec<PathBuf>,
}

/// Renders attribution maps for the first `count` held-out images of one
/// fold. Every file is named with the method, the predicted class, and the
/// model's confidence in that class.
pub fn cmd_explain(
    opts: &RunOptions,
    checkpoints: &Path,
    fold: usize,
    count: usize,
    choice: MethodChoice,
    steps: usize,
) -> Result<Vec<Explanation>> {
    let set = load_checkpoint_set(checkpoints)?;
    let (model, meta) = set
        .entries
        .iter()
        .find(|(_, meta)| meta.fold == fold)
        .ok_or_else(|| {
            Error::Config(format!(
                "no checkpoint for fold {fold} under {}",
                checkpoints.display()
            ))
        })?;
    let samples = opts.load_samples_for(model.config())?;
    let plan = make_folds(&samples, opts.folds, meta.seed)?;
    let (_, test) = plan.split(fold, &samples);

    write_run_manifest(
        opts,
        "explain",
        Some(serde_json::json!({
            "checkpoints": checkpoints,
            "fold": fold,
            "count": count,
            "method": choice.to_string(),
            "steps": steps,
        })),
    )?;

    let mut explanations = Vec::new();
    for (index, sample) in test.iter().take(count).enumerate() {
        let dist = model.predict(&sample.image)?;
        let predicted = if dist.p_pain >= 0.5 {
            ClassLabel::Pain
        } else {
            ClassLabel::NoPain
        };
        let confidence = if predicted == ClassLabel::Pain {
            dist.p_pain
        } else {
            dist.p_no_pain
        };
        let mut files = Vec::new();
        for &method in choice.methods() {
            let map = match method {
                AttributionMethod::GradCam => grad_cam(model, &sample.image, predicted)?,
                AttributionMethod::IntegratedGradients => {
                    integrated_gradients(model, &sample.image, None, predicted, steps)?
                }
            };
            let stem = opts.out.join(format!(
                "fold{fold:02}_sample{index:03}_{method}_{predicted}_c{confidence:.2}"
            ));
            let written = export_attribution(&map, &sample.image, &stem)?;
            for path in [written.mask, written.overlay, written.csv] {
                let name = path.file_name().expect("export paths always carry names");
                files.push(PathBuf::from(name));
            }
        }
        explanations.push(Explanation {
            fold,
            sample: index,
            subject_id: sample.subject_id.clone(),
            predicted,
            confidence,
            files,
        });
    }
    write_json(&opts.out.join("explanations.json"), &explanations)?;
    Ok(explanations)
}

fn report_section<T: for<'de> Deserialize<'de> + Serialize>(
    dir: &Path,
    file: &str,
) -> Option<String> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).ok()?;
    // Round-trip through JSON to confirm the artifact parses before echoing.
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    let _typed: Option<T> = serde_json::from_value(value).ok();
    Some(text)
}

/// Assembles whatever artifacts exist under `run_dir` into one Markdown
/// report. Missing artifacts are skipped, not errors.
pub fn cmd_report(opts: &RunOptions, run_dir: &Path) -> Result<PathBuf> {
    let mut report = String::from("# Run report\n");

    if let Ok(text) = fs::read_to_string(run_dir.join("run_manifest.json")) {
        report.push_str("\n## Run manifest\n\n```json\n");
        report.push_str(&text);
        report.push_str("```\n");
    }
    if let Some(text) = report_section::<TrainReport>(run_dir, "metrics.json") {
        report.push_str("\n## Training metrics\n\n```json\n");
        report.push_str(&text);
        report.push_str("```\n");
    }
    if let Ok(text) = fs::read_to_string(run_dir.join("sweep_table.csv")) {
        report.push_str("\n## Hyperparameter sweep\n\n```\n");
        report.push_str(&text);
        report.push_str("```\n");
    }
    if let Ok(text) = fs::read_to_string(run_dir.join("metrics_table.csv")) {
        report.push_str("\n## Evaluation\n\n```\n");
        report.push_str(&text);
        report.push_str("```\n");
    }
    if let Ok(text) = fs::read_to_string(run_dir.join("calibration_curve.csv")) {
        report.push_str("\n## Calibration curve\n\n```\n");
        report.push_str(&text);
        report.push_str("```\n");
    }
    if let Some(text) = report_section::<Vec<Explanation>>(run_dir, "explanations.json") {
        report.push_str("\n## Attribution exports\n\n```json\n");
        report.push_str(&text);
        report.push_str("```\n");
    }

    write_run_manifest(
        opts,
        "report",
        Some(serde_json::json!({ "run_dir": run_dir })),
    )?;
    let path = opts.out.join("report.md");
    write_text(&path, &report)?;
    Ok(path)
}

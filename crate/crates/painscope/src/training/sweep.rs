//! One-at-a-time hyperparameter sweeps scored by mean F1 across folds.

use super::{train_all, OptimizerKind, SchedulerKind, TrainConfig};
use crate::data::{resize_bilinear, AugmentationConfig, FoldPlan, Sample};
use crate::error::{Error, Result};
use crate::labels::LabelMode;
use crate::metrics::classification_metrics;
use crate::model::ModelConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The hyperparameter a sweep varies while holding the rest at baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    ImageSize,
    Optimizer,
    Epochs,
    LabelSmoothing,
    Scheduler,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::ImageSize => "image_size",
            SweepParameter::Optimizer => "optimizer",
            SweepParameter::Epochs => "epochs",
            SweepParameter::LabelSmoothing => "label_smoothing",
            SweepParameter::Scheduler => "scheduler",
        })
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text {
            "image_size" => Ok(SweepParameter::ImageSize),
            "optimizer" => Ok(SweepParameter::Optimizer),
            "epochs" => Ok(SweepParameter::Epochs),
            "label_smoothing" => Ok(SweepParameter::LabelSmoothing),
            "scheduler" => Ok(SweepParameter::Scheduler),
            other => Err(Error::Config(format!(
                "unknown sweep parameter {other:?}; expected image_size, optimizer, \
                 epochs, label_smoothing, or scheduler"
            ))),
        }
    }
}

/// One candidate's score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    /// Normalized value string, e.g. "adam" or "0.3".
    pub value: String,
    pub mean_f1: f64,
    /// Mean F1 minus the baseline's mean F1.
    pub delta_f1: f64,
}

/// Full sweep report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub hyperparameter: String,
    pub baseline_value: String,
    pub baseline_f1: f64,
    pub candidates: Vec<CandidateOutcome>,
    /// Candidate value with the highest mean F1; ties prefer the baseline
    /// value, then earlier listing order.
    pub selected: String,
}

/// A candidate parsed into the concrete override it applies.
enum Override {
    ImageSize(usize),
    Optimizer(OptimizerKind),
    Epochs(usize),
    LabelSmoothing(LabelMode),
    Scheduler(SchedulerKind),
}

impl Override {
    fn parse(parameter: SweepParameter, text: &str) -> Result<Override> {
        let invalid = |details: &str| {
            Error::Config(format!("candidate {text:?} for {parameter}: {details}"))
        };
        Ok(match parameter {
            SweepParameter::ImageSize => Override::ImageSize(
                text.parse::<usize>()
                    .map_err(|_| invalid("expected a positive integer"))?,
            ),
            SweepParameter::Optimizer => Override::Optimizer(text.parse()?),
            SweepParameter::Epochs => Override::Epochs(
                text.parse::<usize>()
                    .map_err(|_| invalid("expected a positive integer"))?,
            ),
            SweepParameter::LabelSmoothing => Override::LabelSmoothing(text.parse()?),
            SweepParameter::Scheduler => Override::Scheduler(text.parse()?),
        })
    }

    /// Canonical string form, used for baseline-equality checks and output.
    fn normalized(&self) -> String {
        match self {
            Override::ImageSize(size) => size.to_string(),
            Override::Optimizer(kind) => kind.to_string(),
            Override::Epochs(epochs) => epochs.to_string(),
            Override::LabelSmoothing(mode) => mode.to_string(),
            Override::Scheduler(kind) => kind.to_string(),
        }
    }
}

fn baseline_value(
    parameter: SweepParameter,
    model_config: &ModelConfig,
    base: &TrainConfig,
) -> String {
    match parameter {
        SweepParameter::ImageSize => model_config.input_size.to_string(),
        SweepParameter::Optimizer => base.optimizer.to_string(),
        SweepParameter::Epochs => base.epochs.to_string(),
        SweepParameter::LabelSmoothing => base.label_mode.to_string(),
        SweepParameter::Scheduler => base.scheduler.to_string(),
    }
}

/// Mean F1 across folds for one trained configuration.
fn mean_f1(
    model_config: &ModelConfig,
    samples: &[Sample],
    plan: &FoldPlan,
    config: &TrainConfig,
    augmentation: Option<&AugmentationConfig>,
    parallel_folds: usize,
) -> Result<f64> {
    let outcomes = train_all(
        model_config,
        samples,
        plan,
        config,
        augmentation,
        parallel_folds,
    )?;
    let mut sum = 0.0;
    for outcome in &outcomes {
        sum += classification_metrics(&outcome.predictions)?.f1;
    }
    Ok(sum / outcomes.len() as f64)
}

/// Picks the winning candidate: highest mean F1, ties resolved toward the
/// baseline value and then toward earlier listing order.
fn select_candidate(candidates: &[CandidateOutcome], baseline: &str) -> String {
    let mut best = 0;
    for (index, candidate) in candidates.iter().enumerate().skip(1) {
        let current = &candidates[best];
        if candidate.mean_f1 > current.mean_f1
            || (candidate.mean_f1 == current.mean_f1
                && candidate.value == baseline
                && current.value != baseline)
        {
            best = index;
        }
    }
    candidates[best].value.clone()
}

/// Scores every candidate value of one hyperparameter, holding everything
/// else at the baseline. The baseline itself trains once; candidates equal
/// to it reuse that score.
pub fn sweep(
    model_config: &ModelConfig,
    samples: &[Sample],
    plan: &FoldPlan,
    base: &TrainConfig,
    parameter: SweepParameter,
    candidates: &[String],
    augmentation: Option<&AugmentationConfig>,
    parallel_folds: usize,
) -> Result<SweepResult> {
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "sweep over {parameter} needs at least one candidate"
        )));
    }
    let baseline = baseline_value(parameter, model_config, base);
    let baseline_f1 = mean_f1(model_config, samples, plan, base, augmentation, parallel_folds)?;

    let mut outcomes = Vec::with_capacity(candidates.len());
    for text in candidates {
        let parsed = Override::parse(parameter, text)?;
        let value = parsed.normalized();
        let f1 = if value == baseline {
            baseline_f1
        } else {
            match parsed {
                Override::ImageSize(size) => {
                    let mut resized_config = model_config.clone();
                    resized_config.input_size = size;
                    resized_config.validate()?;
                    let resized: Vec<Sample> = samples
                        .iter()
                        .map(|sample| {
                            Ok(Sample {
                                image: resize_bilinear(&sample.image, size, size)?,
                                ..sample.clone()
                            })
                        })
                        .collect::<Result<_>>()?;
                    mean_f1(&resized_config, &resized, plan, base, augmentation, parallel_folds)?
                }
                Override::Optimizer(kind) => {
                    let config = TrainConfig {
                        optimizer: kind,
                        ..base.clone()
                    };
                    mean_f1(model_config, samples, plan, &config, augmentation, parallel_folds)?
                }
                Override::Epochs(epochs) => {
                    let config = TrainConfig {
                        epochs,
                        ..base.clone()
                    };
                    mean_f1(model_config, samples, plan, &config, augmentation, parallel_folds)?
                }
                Override::LabelSmoothing(mode) => {
                    let config = TrainConfig {
                        label_mode: mode,
                        ..base.clone()
                    };
                    mean_f1(model_config, samples, plan, &config, augmentation, parallel_folds)?
                }
                Override::Scheduler(kind) => {
                    let config = TrainConfig {
                        scheduler: kind,
                        ..base.clone()
                    };
                    mean_f1(model_config, samples, plan, &config, augmentation, parallel_folds)?
                }
            }
        };
        outcomes.push(CandidateOutcome {
            value,
            mean_f1: f1,
            delta_f1: f1 - baseline_f1,
        });
    }

    let selected = select_candidate(&outcomes, &baseline);
    Ok(SweepResult {
        hyperparameter: parameter.to_string(),
        baseline_value: baseline,
        baseline_f1,
        candidates: outcomes,
        selected,
    })
}

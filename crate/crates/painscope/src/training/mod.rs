//! Minibatch training with lowest-test-loss checkpointing.
//!
//! Each fold trains independently (and in parallel across folds) from its
//! own derived seeds, so a (config, seed, fold plan) triple fully determines
//! every trajectory regardless of scheduling. The checkpoint kept for a fold
//! is the model from the first epoch that achieved the strictly lowest test
//! loss; test loss is always cross-entropy against the hard one-hot labels,
//! whatever smoothing shaped the training targets.

mod optim;
mod sweep;

pub use optim::{scheduled_lr, Optimizer, OptimizerKind, SchedulerKind};
pub use sweep::{sweep, CandidateOutcome, SweepParameter, SweepResult};

use crate::data::{augment, AugmentationConfig, FoldPlan, Sample};
use crate::error::{Error, Result};
use crate::labels::{ClassLabel, LabelDistribution, LabelMode};
use crate::metrics::PredictionRecord;
use crate::model::{CheckpointMetadata, DropoutMode, Model, ModelConfig};
use crate::seed;
use crate::tensor::{cross_entropy_soft, Tape, Tensor};
use serde::{Deserialize, Serialize};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub scheduler: SchedulerKind,
    pub label_mode: LabelMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Baseline run: 1e-4 learning rate, 100 epochs, batches of 16,
    /// RMSProp, constant learning rate, hard labels.
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerKind::RmsProp,
            scheduler: SchedulerKind::None,
            label_mode: LabelMode::Hard,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if let LabelMode::Lsr { epsilon } = self.label_mode {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(Error::Config(format!(
                    "smoothing epsilon must lie in [0,1), got {epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0-based epoch index.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub learning_rate: f64,
}

/// Everything a finished fold hands back.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    /// The lowest-test-loss model, not the final one.
    pub model: Model,
    /// The model after the last epoch, kept for fit diagnostics.
    pub final_model: Model,
    pub metadata: CheckpointMetadata,
    pub history: Vec<EpochRecord>,
    /// Held-out predictions of the checkpointed model.
    pub predictions: Vec<PredictionRecord>,
}

/// History serialized as one JSON record per line.
pub fn history_lines(history: &[EpochRecord]) -> String {
    let mut out = String::new();
    for record in history {
        out.push_str(&serde_json::to_string(record).expect("history records serialize"));
        out.push('\n');
    }
    out
}

/// Epoch whose test loss the checkpoint rule keeps: the first index
/// attaining the minimum, mirroring the strict-improvement update.
pub fn best_epoch(test_losses: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (epoch, &loss) in test_losses.iter().enumerate() {
        if best.map_or(true, |b| loss < test_losses[b]) {
            best = Some(epoch);
        }
    }
    best
}

struct TrainEntry {
    image: Tensor,
    target: [f64; 2],
}

/// Trains one fold and returns its checkpoint, history, and held-out
/// predictions.
pub fn train_fold(
    model_config: &ModelConfig,
    samples: &[Sample],
    plan: &FoldPlan,
    fold: usize,
    config: &TrainConfig,
    augmentation: Option<&AugmentationConfig>,
) -> Result<FoldOutcome> {
    config.validate()?;
    if fold >= plan.fold_count {
        return Err(Error::Config(format!(
            "fold {fold} does not exist in a {}-fold plan",
            plan.fold_count
        )));
    }
    let (train_refs, test_refs) = plan.split(fold, samples);
    if test_refs.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold} has no test samples; the sample set does not match the fold plan"
        )));
    }

    // Training targets per the label mode; samples the mode cannot label
    // (no facial score in soft mode) stay out of the training set. Indices
    // for augmentation seeds come from the unfiltered order so the same
    // variants appear under every label mode.
    let mut entries = Vec::new();
    for (position, sample) in train_refs.iter().enumerate() {
        let Some(target) = config.label_mode.target(sample.hard_label, sample.nfcs) else {
            continue;
        };
        let target = target.as_array();
        entries.push(TrainEntry {
            image: sample.image.clone(),
            target,
        });
        if let Some(aug_config) = augmentation {
            let variant_seed =
                seed::derive(config.seed, "augment-sample", &[fold as u64, position as u64]);
            for variant in augment(sample, aug_config, variant_seed)? {
                entries.push(TrainEntry {
                    image: variant.image,
                    target,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold} has no trainable samples under label mode {}",
            config.label_mode
        )));
    }

    let mut model = Model::build(
        model_config.clone(),
        seed::derive(config.seed, "model-init-fold", &[fold as u64]),
    )?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(Model, CheckpointMetadata)> = None;

    for epoch in 0..config.epochs {
        let lr = scheduled_lr(config.scheduler, config.learning_rate, epoch, config.epochs)?;
        let mut order: Vec<usize> = (0..entries.len()).collect();
        {
            use rand::seq::SliceRandom;
            let mut shuffle_rng =
                seed::stream(config.seed, "shuffle", &[fold as u64, epoch as u64]);
            order.shuffle(&mut shuffle_rng);
        }
        let mut dropout_rng = seed::stream(config.seed, "dropout", &[fold as u64, epoch as u64]);

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let binding = model.bind(&mut tape);
            let mut losses = Vec::with_capacity(batch.len());
            for &index in batch {
                let entry = &entries[index];
                let trace = model.forward(
                    &mut tape,
                    &binding,
                    &entry.image,
                    DropoutMode::Sampled(&mut dropout_rng),
                )?;
                losses.push(tape.cross_entropy(trace.probabilities, &entry.target)?);
            }
            let mut total = losses[0];
            for &loss in &losses[1..] {
                total = tape.add(total, loss)?;
            }
            let mean = tape.scale(total, 1.0 / batch.len() as f64);
            tape.backward(mean)?;
            let batch_loss = tape.values(mean)[0];
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { fold, epoch });
            }
            let grads: Vec<Vec<f64>> = binding
                .ids()
                .iter()
                .map(|&id| tape.grad(id).to_vec())
                .collect();
            optimizer.step(lr, model.params_mut(), &grads)?;
            loss_sum += batch_loss * batch.len() as f64;
        }
        let train_loss = loss_sum / entries.len() as f64;
        let test_loss = mean_test_loss(&model, &test_refs)?;
        if !test_loss.is_finite() {
            return Err(Error::NonFiniteLoss { fold, epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            test_loss,
            learning_rate: lr,
        });
        let improved = best
            .as_ref()
            .map_or(true, |(_, meta)| test_loss < meta.test_loss);
        if improved {
            best = Some((
                model.clone(),
                CheckpointMetadata {
                    seed: config.seed,
                    fold,
                    label_mode: config.label_mode.clone(),
                    epoch,
                    test_loss,
                },
            ));
        }
    }

    let (best_model, metadata) = best.expect("at least one epoch ran");
    let mut predictions = Vec::with_capacity(test_refs.len());
    for sample in &test_refs {
        let distribution = best_model.predict(&sample.image)?;
        predictions.push(PredictionRecord {
            confidence_pain: distribution.probability(ClassLabel::Pain),
            true_label: sample.hard_label,
            fold,
            subject_id: sample.subject_id.clone(),
        });
    }
    Ok(FoldOutcome {
        fold,
        model: best_model,
        final_model: model,
        metadata,
        history,
        predictions,
    })
}

/// Mean cross-entropy of the model's predictions against hard one-hot
/// labels. Used for checkpoint selection in every label mode.
fn mean_test_loss(model: &Model, test_refs: &[&Sample]) -> Result<f64> {
    let mut sum = 0.0;
    for sample in test_refs {
        let predicted = model.predict(&sample.image)?;
        let target = LabelDistribution::one_hot(sample.hard_label);
        sum += cross_entropy_soft(&predicted.as_array(), &target.as_array());
    }
    Ok(sum / test_refs.len() as f64)
}

/// Trains every fold of the plan and returns the outcomes in fold order.
/// At most `parallel_folds` trainers run concurrently; the results do not
/// depend on the bound, only the wall-clock does.
pub fn train_all(
    model_config: &ModelConfig,
    samples: &[Sample],
    plan: &FoldPlan,
    config: &TrainConfig,
    augmentation: Option<&AugmentationConfig>,
    parallel_folds: usize,
) -> Result<Vec<FoldOutcome>> {
    let parallel = parallel_folds.max(1);
    let folds: Vec<usize> = (0..plan.fold_count).collect();
    let mut outcomes = Vec::with_capacity(plan.fold_count);
    for wave in folds.chunks(parallel) {
        let results: Vec<Result<FoldOutcome>> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&fold| {
                    scope.spawn(move || {
                        train_fold(model_config, samples, plan, fold, config, augmentation)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|handle| handle.join().expect("fold trainer panicked"))
                .collect()
        });
        for result in results {
            outcomes.push(result?);
        }
    }
    Ok(outcomes)
}

//! First-order optimizers and learning-rate schedules.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const RMSPROP_DECAY: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Update rule applied to every parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
    Adam,
    Adagrad,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Adagrad => "adagrad",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text {
            "sgd" => Ok(OptimizerKind::Sgd),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adam" => Ok(OptimizerKind::Adam),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?}; expected sgd, rmsprop, adam, or adagrad"
            ))),
        }
    }
}

/// Per-parameter accumulators. `first` holds the Adam first moment; `second`
/// holds the squared-gradient accumulator of RMSProp, Adam, and Adagrad.
#[derive(Debug, Clone)]
struct Slot {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// An optimizer bound to one model's parameter list.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    slots: Vec<Slot>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            slots: Vec::new(),
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update. `grads` must align with `params` element by
    /// element; accumulator state is created on the first call.
    pub fn step(
        &mut self,
        learning_rate: f64,
        params: &mut [(String, Tensor)],
        grads: &[Vec<f64>],
    ) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Shape {
                op: "optimizer_step",
                details: format!(
                    "{} gradient vectors for {} parameters",
                    grads.len(),
                    params.len()
                ),
            });
        }
        for ((name, tensor), grad) in params.iter().zip(grads) {
            if grad.len() != tensor.len() {
                return Err(Error::Shape {
                    op: "optimizer_step",
                    details: format!(
                        "gradient for {name} has {} values, parameter has {}",
                        grad.len(),
                        tensor.len()
                    ),
                });
            }
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|(_, tensor)| Slot {
                    first: vec![0.0; tensor.len()],
                    second: vec![0.0; tensor.len()],
                })
                .collect();
        }
        self.steps += 1;

        for (slot_index, ((_, tensor), grad)) in params.iter_mut().zip(grads).enumerate() {
            let slot = &mut self.slots[slot_index];
            let values = tensor.values_mut();
            match self.kind {
                OptimizerKind::Sgd => {
                    for (value, g) in values.iter_mut().zip(grad) {
                        *value -= learning_rate * g;
                    }
                }
                OptimizerKind::RmsProp => {
                    for ((value, g), acc) in values.iter_mut().zip(grad).zip(&mut slot.second) {
                        *acc = RMSPROP_DECAY * *acc + (1.0 - RMSPROP_DECAY) * g * g;
                        *value -= learning_rate * g / (acc.sqrt() + EPSILON);
                    }
                }
                OptimizerKind::Adam => {
                    let correct1 = 1.0 - ADAM_BETA1.powi(self.steps as i32);
                    let correct2 = 1.0 - ADAM_BETA2.powi(self.steps as i32);
                    for ((value, g), (m, v)) in values
                        .iter_mut()
                        .zip(grad)
                        .zip(slot.first.iter_mut().zip(&mut slot.second))
                    {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = *m / correct1;
                        let v_hat = *v / correct2;
                        *value -= learning_rate * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
                OptimizerKind::Adagrad => {
                    for ((value, g), acc) in values.iter_mut().zip(grad).zip(&mut slot.second) {
                        *acc += g * g;
                        *value -= learning_rate * g / (acc.sqrt() + EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Learning-rate schedule evaluated per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    None,
    /// Decays by 0.1 every `total_epochs / 3` epochs.
    Step,
    /// Decays by 0.97 every epoch.
    Exponential,
    /// Half-cosine from the base rate down to zero across the run.
    CosineAnnealing,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::None => "none",
            SchedulerKind::Step => "step",
            SchedulerKind::Exponential => "exponential",
            SchedulerKind::CosineAnnealing => "cosine_annealing",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text {
            "none" => Ok(SchedulerKind::None),
            "step" => Ok(SchedulerKind::Step),
            "exponential" => Ok(SchedulerKind::Exponential),
            "cosine_annealing" => Ok(SchedulerKind::CosineAnnealing),
            other => Err(Error::Config(format!(
                "unknown scheduler {other:?}; expected none, step, exponential, or cosine_annealing"
            ))),
        }
    }
}

const STEP_GAMMA: f64 = 0.1;
const EXPONENTIAL_GAMMA: f64 = 0.97;

/// Learning rate for a 0-based epoch index. Valid for 0 <= epoch <=
/// total_epochs; cosine annealing hits the base rate at epoch 0 and zero at
/// epoch == total_epochs exactly.
pub fn scheduled_lr(
    kind: SchedulerKind,
    base_lr: f64,
    epoch: usize,
    total_epochs: usize,
) -> Result<f64> {
    if total_epochs == 0 {
        return Err(Error::Config("total_epochs must be positive".into()));
    }
    if epoch > total_epochs {
        return Err(Error::Config(format!(
            "epoch {epoch} is past the end of a {total_epochs}-epoch run"
        )));
    }
    Ok(match kind {
        SchedulerKind::None => base_lr,
        SchedulerKind::Step => {
            let step_size = (total_epochs / 3).max(1);
            base_lr * STEP_GAMMA.powi((epoch / step_size) as i32)
        }
        SchedulerKind::Exponential => base_lr * EXPONENTIAL_GAMMA.powi(epoch as i32),
        SchedulerKind::CosineAnnealing => {
            let eta_min = 0.0;
            let phase = std::f64::consts::PI * epoch as f64 / total_epochs as f64;
            eta_min + (base_lr - eta_min) * (1.0 + phase.cos()) / 2.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(value: f64) -> Vec<(String, Tensor)> {
        vec![("p".into(), Tensor::scalar(value))]
    }

    #[test]
    fn sgd_single_step_is_definitional() {
        let mut params = one_param(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd);
        opt.step(0.1, &mut params, &[vec![0.5]]).unwrap();
        assert!((params[0].1.values()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_with_zero_learning_rate_is_identity() {
        let mut params = one_param(0.73);
        let mut opt = Optimizer::new(OptimizerKind::Sgd);
        for _ in 0..20 {
            opt.step(0.0, &mut params, &[vec![3.7]]).unwrap();
        }
        assert!((params[0].1.values()[0] - 0.73).abs() <= 1e-12);
    }

    #[test]
    fn rmsprop_first_step_from_zero_state() {
        let mut params = one_param(0.0);
        let mut opt = Optimizer::new(OptimizerKind::RmsProp);
        opt.step(0.01, &mut params, &[vec![1.0]]).unwrap();
        // a = 0.1, update = 0.01 / (sqrt(0.1) + 1e-8).
        let expected = -0.01 / (0.1f64.sqrt() + 1e-8);
        assert!((params[0].1.values()[0] - expected).abs() < 1e-12);
        assert!((params[0].1.values()[0] + 0.031623).abs() < 1e-6);
    }

    #[test]
    fn adam_first_step_magnitude_is_the_learning_rate() {
        let mut params = one_param(0.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam);
        opt.step(0.001, &mut params, &[vec![1.0]]).unwrap();
        // Bias correction makes m_hat = g and v_hat = g^2 on step one, so
        // the update is lr * g / (|g| + eps).
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((params[0].1.values()[0] - expected).abs() < 1e-12);
        assert!((params[0].1.values()[0].abs() - 0.001).abs() < 1e-8);
    }

    #[test]
    fn adagrad_accumulates_squared_gradients() {
        let mut params = one_param(0.0);
        let mut opt = Optimizer::new(OptimizerKind::Adagrad);
        opt.step(0.1, &mut params, &[vec![2.0]]).unwrap();
        // acc = 4, update = 0.1 * 2 / (2 + 1e-8).
        let first = -0.1 * 2.0 / (2.0 + 1e-8);
        assert!((params[0].1.values()[0] - first).abs() < 1e-12);
        opt.step(0.1, &mut params, &[vec![2.0]]).unwrap();
        // acc = 8, update = 0.1 * 2 / sqrt(8).
        let second = first - 0.1 * 2.0 / (8.0f64.sqrt() + 1e-8);
        assert!((params[0].1.values()[0] - second).abs() < 1e-12);
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let mut params = one_param(0.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd);
        assert!(opt.step(0.1, &mut params, &[]).is_err());
        assert!(opt.step(0.1, &mut params, &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn optimizer_names_round_trip() {
        for kind in [
            OptimizerKind::Sgd,
            OptimizerKind::RmsProp,
            OptimizerKind::Adam,
            OptimizerKind::Adagrad,
        ] {
            assert_eq!(kind.to_string().parse::<OptimizerKind>().unwrap(), kind);
        }
        assert!("momentum".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn scheduler_names_round_trip() {
        for kind in [
            SchedulerKind::None,
            SchedulerKind::Step,
            SchedulerKind::Exponential,
            SchedulerKind::CosineAnnealing,
        ] {
            assert_eq!(kind.to_string().parse::<SchedulerKind>().unwrap(), kind);
        }
        assert!("plateau".parse::<SchedulerKind>().is_err());
    }

    #[test]
    fn cosine_endpoints_are_exact() {
        let base = 1e-4;
        assert_eq!(
            scheduled_lr(SchedulerKind::CosineAnnealing, base, 0, 100).unwrap(),
            base
        );
        assert_eq!(
            scheduled_lr(SchedulerKind::CosineAnnealing, base, 100, 100).unwrap(),
            0.0
        );
    }

    #[test]
    fn cosine_midpoint_is_half_the_base_rate() {
        let lr = scheduled_lr(SchedulerKind::CosineAnnealing, 1e-4, 50, 100).unwrap();
        assert!((lr - 5e-5).abs() < 1e-12);
    }

    #[test]
    fn step_schedule_decays_by_decade_each_third() {
        let base = 1e-3;
        // 90 epochs: thirds are [0,30), [30,60), [60,90].
        for (epoch, factor) in [(0, 1.0), (29, 1.0), (30, 0.1), (59, 0.1), (60, 0.01)] {
            let lr = scheduled_lr(SchedulerKind::Step, base, epoch, 90).unwrap();
            assert!((lr - base * factor).abs() < 1e-15, "epoch {epoch}");
        }
    }

    #[test]
    fn exponential_schedule_compounds_per_epoch() {
        let lr = scheduled_lr(SchedulerKind::Exponential, 1e-4, 10, 100).unwrap();
        assert!((lr - 1e-4 * 0.97f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn constant_schedule_ignores_the_epoch() {
        for epoch in [0, 17, 100] {
            assert_eq!(
                scheduled_lr(SchedulerKind::None, 3e-4, epoch, 100).unwrap(),
                3e-4
            );
        }
    }

    #[test]
    fn out_of_range_epochs_are_rejected() {
        assert!(scheduled_lr(SchedulerKind::None, 1e-4, 101, 100).is_err());
        assert!(scheduled_lr(SchedulerKind::None, 1e-4, 0, 0).is_err());
    }
}

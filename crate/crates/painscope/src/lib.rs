//! Neonatal pain classification toolkit: a three-branch convolutional
//! classifier trained with hard, smoothed, or facial-scale-derived soft
//! labels, audited for accuracy, calibration, and explainability.
//!
//! Everything runs on a from-scratch reverse-mode autodiff tape over dense
//! f64 tensors; there is no BLAS, no threading framework, and no global
//! state. Every random draw descends from one root seed, so runs are
//! bit-reproducible across machines.
//!
//! # Module map
//!
//! - [`tensor`]: tensors, the autodiff [`tensor::Tape`], and its operators
//!   (convolution, pooling, dense, softmax, cross-entropy, dropout).
//! - [`model`]: the three-branch network, forward traces, checkpoints.
//! - [`labels`]: class labels, the facial-scale sigmoid, label smoothing,
//!   and the target-encoding modes.
//! - [`data`]: synthetic face dataset, augmentation, manifests, and
//!   subject-disjoint cross-validation folds.
//! - [`training`]: per-fold training loops, optimizers, schedulers, and the
//!   hyperparameter sweep.
//! - [`metrics`]: classification metrics, reliability curves, expected
//!   calibration error, and the paired t-test.
//! - [`attribution`]: class activation maps and integrated gradients, with
//!   PNG/CSV export.
//! - [`experiment`]: run orchestration behind the CLI; presets, manifests,
//!   artifact layouts.
//! - [`cli`]: the `painscope` command-line surface over [`experiment`].
//!
//! # Examples
//!
//! Each major capability has a runnable walkthrough under `examples/`:
//!
//! - `autodiff_basics`: hand-built tape, gradients checked against finite
//!   differences.
//! - `synthetic_dataset`: generating, saving, and reloading a dataset;
//!   subject-disjoint folds.
//! - `label_modes`: hard targets, smoothing tables, and sigmoid soft labels
//!   side by side.
//! - `train_and_checkpoint`: one fold trained end to end, checkpointed,
//!   reloaded, and verified.
//! - `calibration_audit`: reliability bins, calibration error, and a
//!   confidence histogram for a trained run.
//! - `attribution_maps`: activation maps and integrated gradients for one
//!   prediction, exported to disk.
//! - `hyperparameter_sweep`: scoring smoothing candidates against a
//!   baseline on shared folds.
//! - `full_protocol`: the whole pipeline (generate, train, evaluate,
//!   calibrate, explain) through the orchestration layer.
//!
//! Run one with `cargo run --example <name>`. The same flows are scriptable
//! through the `painscope` binary; see the README for the command set.

pub mod attribution;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};

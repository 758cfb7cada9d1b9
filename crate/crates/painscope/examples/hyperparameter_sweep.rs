//! Scores label-smoothing candidates one at a time against the hard-label
//! baseline, holding every other hyperparameter fixed. Each candidate is
//! judged by mean held-out F1 across folds; ties go to the baseline.
//!
//! Run with: cargo run --example hyperparameter_sweep

use painscope::data::{generate_synthetic, make_folds};
use painscope::experiment::ModelSize;
use painscope::training::{sweep, OptimizerKind, SweepParameter, TrainConfig};

fn main() -> painscope::Result<()> {
    let seed = 5;
    let samples = generate_synthetic(8, 4, 16, seed)?;
    let plan = make_folds(&samples, 4, seed)?;
    let model_config = ModelSize::Tiny.config(16, 1);
    let base = TrainConfig {
        learning_rate: 5e-3,
        epochs: 8,
        batch_size: 4,
        optimizer: OptimizerKind::Adam,
        seed,
        ..TrainConfig::default()
    };

    let candidates: Vec<String> = ["0.1", "0.3", "nfcs"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let result = sweep(
        &model_config,
        &samples,
        &plan,
        &base,
        SweepParameter::LabelSmoothing,
        &candidates,
        None,
        1,
    )?;

    println!(
        "baseline {} = {} scored mean F1 {:.4}",
        result.hyperparameter, result.baseline_value, result.baseline_f1
    );
    println!("\n{:<10} {:>8} {:>9}", "candidate", "mean_f1", "delta_f1");
    for candidate in &result.candidates {
        let marker = if candidate.value == result.selected {
            "  <- selected"
        } else {
            ""
        };
        println!(
            "{:<10} {:>8.4} {:>+9.4}{marker}",
            candidate.value, candidate.mean_f1, candidate.delta_f1
        );
    }
    Ok(())
}

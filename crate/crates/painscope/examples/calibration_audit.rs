//! Trains across folds, pools every held-out prediction, and audits how
//! well confidence tracks empirical frequency: reliability bins, expected
//! calibration error, and a confidence histogram.
//!
//! Run with: cargo run --example calibration_audit

use painscope::data::{generate_synthetic, make_folds};
use painscope::experiment::ModelSize;
use painscope::metrics::{
    calibration_curve, classification_metrics, confidence_histogram, DEFAULT_BINS,
};
use painscope::training::{train_all, OptimizerKind, TrainConfig};

fn main() -> painscope::Result<()> {
    let seed = 33;
    let samples = generate_synthetic(8, 4, 16, seed)?;
    let plan = make_folds(&samples, 4, seed)?;
    let model_config = ModelSize::Tiny.config(16, 1);
    let config = TrainConfig {
        learning_rate: 5e-3,
        epochs: 10,
        batch_size: 4,
        optimizer: OptimizerKind::Adam,
        seed,
        ..TrainConfig::default()
    };

    let outcomes = train_all(&model_config, &samples, &plan, &config, None, 1)?;
    let mut records = Vec::new();
    for outcome in &outcomes {
        records.extend(outcome.predictions.iter().cloned());
    }
    let metrics = classification_metrics(&records)?;
    println!(
        "pooled held-out predictions: {} (accuracy {:.3}, f1 {:.3})",
        records.len(),
        metrics.accuracy,
        metrics.f1
    );

    let report = calibration_curve(&records, DEFAULT_BINS)?;
    println!("\nreliability bins (perfect calibration: frequency == confidence):");
    println!("  bin  mean_confidence  pain_frequency  count");
    for (index, bin) in report.bins.iter().enumerate() {
        if bin.count == 0 {
            continue;
        }
        println!(
            "  {:>3}  {:>15.4}  {:>14.4}  {:>5}",
            index + 1,
            bin.mean_confidence,
            bin.frequency,
            bin.count
        );
    }
    println!("\nexpected calibration error: {:.4}", report.ece);
    println!("(count-weighted mean |confidence - frequency| across bins)");

    let histogram = confidence_histogram(&records, DEFAULT_BINS)?;
    println!("\nconfidence histogram:");
    for (index, count) in histogram.iter().enumerate() {
        let lo = index as f64 / DEFAULT_BINS as f64;
        let hi = (index + 1) as f64 / DEFAULT_BINS as f64;
        println!("  [{lo:.1}, {hi:.1}): {}", "#".repeat(*count));
    }
    Ok(())
}

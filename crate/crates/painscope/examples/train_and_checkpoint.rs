//! Trains a small model on one cross-validation fold, shows the epoch
//! history, and round-trips the best checkpoint through the binary
//! format. The checkpoint is always the epoch with the lowest held-out
//! loss, not the last one.
//!
//! Run with: cargo run --example train_and_checkpoint

use painscope::data::{generate_synthetic, make_folds};
use painscope::experiment::ModelSize;
use painscope::model::{load_checkpoint, save_checkpoint};
use painscope::training::{train_fold, OptimizerKind, TrainConfig};

fn main() -> painscope::Result<()> {
    let seed = 21;
    let samples = generate_synthetic(8, 4, 16, seed)?;
    let plan = make_folds(&samples, 4, seed)?;
    let model_config = ModelSize::Tiny.config(16, 1);

    let config = TrainConfig {
        learning_rate: 5e-3,
        epochs: 12,
        batch_size: 4,
        optimizer: OptimizerKind::Adam,
        seed,
        ..TrainConfig::default()
    };

    let outcome = train_fold(&model_config, &samples, &plan, 0, &config, None)?;
    println!("epoch  train_loss  test_loss");
    for record in &outcome.history {
        let marker = if record.epoch == outcome.metadata.epoch {
            "  <- checkpointed"
        } else {
            ""
        };
        println!(
            "{:>5}  {:>10.4}  {:>9.4}{marker}",
            record.epoch, record.train_loss, record.test_loss
        );
    }
    println!(
        "\nbest epoch {} with held-out loss {:.4}",
        outcome.metadata.epoch, outcome.metadata.test_loss
    );

    let path = std::env::temp_dir().join("painscope_example_fold0.ckpt");
    save_checkpoint(&outcome.model, &path, &outcome.metadata)?;
    let (restored, metadata) = load_checkpoint(&path)?;
    println!(
        "checkpoint round-trip: epoch {}, test loss {:.4}, {} parameter tensors",
        metadata.epoch,
        metadata.test_loss,
        restored.params().len()
    );

    // Restored weights predict identically to the in-memory model.
    let sample = &samples[0];
    let before = outcome.model.predict(&sample.image)?;
    let after = restored.predict(&sample.image)?;
    println!(
        "p(pain) before save {:.6}, after load {:.6}",
        before.p_pain, after.p_pain
    );
    Ok(())
}

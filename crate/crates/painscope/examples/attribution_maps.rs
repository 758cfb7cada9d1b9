//! Trains a small model, then explains one held-out prediction two ways:
//! a region-level class activation map from the last convolutional layer,
//! and pixel-level integrated gradients with its completeness check. Both
//! maps are exported as PNG masks, overlays, and raw CSV grids.
//!
//! Run with: cargo run --example attribution_maps

use painscope::attribution::{
    export_attribution, grad_cam, integrated_gradients, target_logit,
};
use painscope::data::{generate_synthetic, make_folds};
use painscope::experiment::ModelSize;
use painscope::labels::ClassLabel;
use painscope::tensor::Tensor;
use painscope::training::{train_fold, OptimizerKind, TrainConfig};

fn main() -> painscope::Result<()> {
    let seed = 17;
    let samples = generate_synthetic(8, 4, 16, seed)?;
    let plan = make_folds(&samples, 4, seed)?;
    let model_config = ModelSize::Tiny.config(16, 1);
    let config = TrainConfig {
        learning_rate: 5e-3,
        epochs: 25,
        batch_size: 4,
        optimizer: OptimizerKind::Adam,
        seed,
        ..TrainConfig::default()
    };
    let outcome = train_fold(&model_config, &samples, &plan, 0, &config, None)?;
    let model = &outcome.final_model;

    // Pick the first held-out image the model calls painful.
    let (_, test) = plan.split(0, &samples);
    let sample = test
        .iter()
        .find(|s| {
            model
                .predict(&s.image)
                .map(|d| d.p_pain >= 0.5)
                .unwrap_or(false)
        })
        .unwrap_or(&test[0]);
    let dist = model.predict(&sample.image)?;
    println!(
        "explaining {} (true label {}, p(pain) = {:.3})",
        sample.subject_id, sample.hard_label, dist.p_pain
    );

    let cam = grad_cam(model, &sample.image, ClassLabel::Pain)?;
    let peak = cam
        .values
        .values()
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    println!(
        "\nclass activation map: {}x{} grid, peak {:.3}, all_zero = {}",
        cam.values.shape()[0],
        cam.values.shape()[1],
        peak,
        cam.all_zero
    );

    let steps = 128;
    let ig = integrated_gradients(model, &sample.image, None, ClassLabel::Pain, steps)?;
    let total: f64 = ig.values.values().iter().sum();
    let at_image = target_logit(model, &sample.image, ClassLabel::Pain)?;
    let baseline = Tensor::zeros(sample.image.shape().to_vec());
    let at_baseline = target_logit(model, &baseline, ClassLabel::Pain)?;
    println!(
        "integrated gradients ({steps} steps): attribution sum {total:+.5} vs logit gap {:+.5}",
        at_image - at_baseline
    );
    println!("(the two agree up to the Riemann-sum truncation error)");

    let dir = std::env::temp_dir().join("painscope_attribution_example");
    std::fs::create_dir_all(&dir).map_err(|e| painscope::Error::io(&dir, e))?;
    for (name, map) in [("cam", &cam), ("ig", &ig)] {
        let files = export_attribution(map, &sample.image, &dir.join(name))?;
        println!(
            "wrote {} / {} / {}",
            files.mask.display(),
            files.overlay.display(),
            files.csv.display()
        );
    }
    Ok(())
}

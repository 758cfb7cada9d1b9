//! The whole pipeline through the orchestration layer, the same code path
//! the command-line binary uses: generate data, train per fold, evaluate
//! two checkpoint sets against each other, audit calibration, and export
//! attribution maps.
//!
//! Run with: cargo run --example full_protocol

use painscope::experiment::{
    cmd_calibrate, cmd_evaluate, cmd_explain, cmd_generate_data, cmd_train, MethodChoice,
    Overrides,
};
use std::path::{Path, PathBuf};

fn options(root: &Path, sub: &str, extra: Overrides) -> painscope::Result<painscope::experiment::RunOptions> {
    let base = Overrides {
        subjects: Some(6),
        per_subject: Some(4),
        model_size: Some("tiny".into()),
        optimizer: Some("adam".into()),
        learning_rate: Some(5e-3),
        epochs: Some(8),
        batch_size: Some(4),
        folds: Some(3),
        augment_count: Some(0),
        seed: Some(77),
        out: Some(root.join(sub)),
        ..Overrides::default()
    };
    base.overlay(extra).resolve()
}

fn main() -> painscope::Result<()> {
    let root = std::env::temp_dir().join("painscope_full_protocol");
    let _ = std::fs::remove_dir_all(&root);

    let data_opts = options(&root, "data", Overrides::default())?;
    let manifest = cmd_generate_data(&data_opts)?;
    println!("dataset manifest: {}", manifest.display());

    let manifest_flag = Overrides {
        data: Some(manifest.display().to_string()),
        ..Overrides::default()
    };

    // Two training runs: hard labels vs smoothed labels.
    let hard_opts = options(&root, "hard", manifest_flag.clone())?;
    let hard = cmd_train(&hard_opts)?;
    println!("hard labels: mean F1 {:.4}", hard.mean_f1);

    let smooth_opts = options(
        &root,
        "smooth",
        Overrides {
            labels: Some("0.3".into()),
            ..manifest_flag.clone()
        },
    )?;
    let smooth = cmd_train(&smooth_opts)?;
    println!("smoothed labels: mean F1 {:.4}", smooth.mean_f1);

    // Compare the two checkpoint sets on the same held-out folds.
    let eval_opts = options(&root, "eval", manifest_flag.clone())?;
    let evaluation = cmd_evaluate(
        &eval_opts,
        &root.join("smooth"),
        Some(&root.join("hard").to_path_buf()),
    )?;
    let delta = evaluation.delta.expect("comparison requested");
    let t_test = evaluation.f1_t_test.expect("comparison requested");
    println!(
        "smoothed minus hard: delta F1 {:+.4}, paired t = {:.3}, p = {:.3}",
        delta.f1, t_test.t_statistic, t_test.p_value
    );

    let cal_opts = options(&root, "cal", manifest_flag.clone())?;
    let calibration = cmd_calibrate(&cal_opts, &root.join("smooth"), 10)?;
    println!(
        "smoothed checkpoints: ECE {:.4} over {} predictions",
        calibration.ece, calibration.record_count
    );

    let explain_opts = options(&root, "explain", manifest_flag)?;
    let explanations = cmd_explain(
        &explain_opts,
        &root.join("smooth"),
        0,
        2,
        MethodChoice::Both,
        64,
    )?;
    for explanation in &explanations {
        let names: Vec<&str> = explanation
            .files
            .iter()
            .filter_map(|f: &PathBuf| f.to_str())
            .collect();
        println!(
            "explained sample {} ({}): {} files, e.g. {}",
            explanation.sample,
            explanation.subject_id,
            names.len(),
            names[0]
        );
    }
    println!("\nartifacts under {}", root.display());
    Ok(())
}

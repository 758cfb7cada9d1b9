//! Shows the three training-target modes side by side: one-hot hard
//! labels, uniformly smoothed labels, and sigmoid soft labels derived
//! from the five-unit facial activity score.
//!
//! Run with: cargo run --example label_modes

use painscope::labels::{
    lsr_smooth, nfcs_hard_label, nfcs_sigmoid, nfcs_soft_label, ClassLabel, LabelMode, NfcsScore,
};

fn main() -> painscope::Result<()> {
    println!("hard one-hot targets [p_no_pain, p_pain]:");
    for label in [ClassLabel::NoPain, ClassLabel::Pain] {
        let target = lsr_smooth(label, 0.0)?;
        println!("  {label}: [{:.1}, {:.1}]", target.p_no_pain, target.p_pain);
    }

    println!("\nsmoothing pulls targets toward uniform (epsilon = 0.2):");
    let smoothed = lsr_smooth(ClassLabel::Pain, 0.2)?;
    println!(
        "  pain: [{:.2}, {:.2}]  (off class epsilon/2, on class 1 - epsilon/2)",
        smoothed.p_no_pain, smoothed.p_pain
    );

    println!("\nsigmoid soft labels across the score range (threshold at 3):");
    println!("  score  S(score)  [p_no_pain, p_pain]  hard label");
    for value in 0u8..=5 {
        let score = NfcsScore::new(value)?;
        let s = nfcs_sigmoid(score);
        let soft = nfcs_soft_label(score);
        let hard = nfcs_hard_label(score);
        println!(
            "  {value}      {s:.4}    [{:.4}, {:.4}]     {hard}",
            soft.p_no_pain, soft.p_pain
        );
    }

    println!("\nper-sample targets under each mode:");
    let score = NfcsScore::new(4)?;
    for mode in [
        LabelMode::Hard,
        LabelMode::Lsr { epsilon: 0.3 },
        LabelMode::NfcsSoft,
    ] {
        let target = mode
            .target(ClassLabel::Pain, Some(score))
            .expect("scored sample has a target in every mode");
        println!(
            "  {mode:>5}: [{:.4}, {:.4}]",
            target.p_no_pain, target.p_pain
        );
    }
    let unscored = LabelMode::NfcsSoft.target(ClassLabel::Pain, None);
    println!("  unscored sample under the soft mode: {unscored:?} (skipped in training)");
    Ok(())
}

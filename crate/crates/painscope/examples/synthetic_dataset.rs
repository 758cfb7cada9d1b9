//! Generates a small synthetic face-like dataset, writes it to disk as
//! PNGs plus a manifest, and reads it back through the ingestion path.
//!
//! Each subject's images share an identity marker; pain-coded images
//! carry extra high-contrast blobs whose count tracks the facial score,
//! so the two classes are separable by construction.
//!
//! Run with: cargo run --example synthetic_dataset

use painscope::data::{generate_synthetic, load_manifest, make_folds, save_dataset};

fn main() -> painscope::Result<()> {
    let samples = generate_synthetic(6, 4, 24, 42)?;
    println!("generated {} images from 6 subjects", samples.len());

    let mut pain = 0;
    let mut scored = 0;
    for sample in &samples {
        if sample.hard_label == painscope::labels::ClassLabel::Pain {
            pain += 1;
        }
        if sample.nfcs.is_some() {
            scored += 1;
        }
    }
    println!("pain-labeled: {pain}, facially scored: {scored}");

    let dir = std::env::temp_dir().join("painscope_synthetic_example");
    let manifest = save_dataset(&samples, &dir)?;
    println!("wrote {}", manifest.display());

    let reloaded = load_manifest(&manifest, 24, 1)?;
    println!("reloaded {} samples through the manifest", reloaded.len());

    // Subject-disjoint folds: every subject's images stay together.
    let plan = make_folds(&reloaded, 3, 42)?;
    for fold in 0..plan.fold_count {
        let (train, test) = plan.split(fold, &reloaded);
        let mut test_subjects: Vec<&str> =
            test.iter().map(|s| s.subject_id.as_str()).collect();
        test_subjects.dedup();
        println!(
            "fold {fold}: {} train / {} test images, held-out subjects {:?}",
            train.len(),
            test.len(),
            test_subjects
        );
    }
    Ok(())
}

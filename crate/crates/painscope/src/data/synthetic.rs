//! Deterministic synthetic face data.
//!
//! Clinical neonatal images are not redistributable, so tests and examples
//! run on generated stand-ins: a flat oval "face" over a darker background,
//! with k bright elliptical marker blobs at canonical facial action sites
//! (two brows, two nasolabial points, mouth). Painful faces show k in 3..=5,
//! calm faces k in 0..=2, and each image's NFCS score is set to k, so blob
//! count separates the classes and exercises the soft-label path end to end.

use super::Sample;
use crate::error::{Error, Result};
use crate::labels::{nfcs_hard_label, NfcsScore};
use crate::seed;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;

/// Canonical marker sites as (x, y) fractions of the image side.
const FAU_SITES: [(f64, f64); 5] = [
    (0.35, 0.30),
    (0.65, 0.30),
    (0.35, 0.62),
    (0.65, 0.62),
    (0.50, 0.78),
];

const BACKGROUND: f64 = 0.15;
const FACE_TONE: f64 = 0.5;
const NOISE: f64 = 0.02;

/// One painted blob, in pixel coordinates. Exposed so explainability tests
/// can check that attribution mass lands on the discriminative regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobRegion {
    pub center_x: f64,
    pub center_y: f64,
    pub radius_x: f64,
    pub radius_y: f64,
}

impl BlobRegion {
    /// Whether a pixel center falls inside the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.center_x) / self.radius_x;
        let dy = (y - self.center_y) / self.radius_y;
        dx * dx + dy * dy <= 1.0
    }
}

/// Generates `count_subjects * images_per_subject` samples along with the
/// blob geometry of each image. Subjects alternate class (even index calm,
/// odd painful); every draw comes from a substream of (seed, subject, image),
/// so datasets are identical across runs and machines.
pub fn generate_synthetic_with_regions(
    count_subjects: usize,
    images_per_subject: usize,
    image_size: usize,
    seed_value: u64,
) -> Result<Vec<(Sample, Vec<BlobRegion>)>> {
    if count_subjects == 0 || images_per_subject == 0 {
        return Err(Error::Config(
            "subject and image counts must be positive".into(),
        ));
    }
    if image_size < 8 {
        return Err(Error::Config(format!(
            "image size {image_size} too small for marker geometry"
        )));
    }
    let mut out = Vec::with_capacity(count_subjects * images_per_subject);
    for subject in 0..count_subjects {
        let painful = subject % 2 == 1;
        for image_index in 0..images_per_subject {
            let mut rng = seed::stream(
                seed_value,
                "synthetic",
                &[subject as u64, image_index as u64],
            );
            let k: u8 = if painful {
                rng.gen_range(3..=5)
            } else {
                rng.gen_range(0..=2)
            };
            let (image, regions) = paint_face(&mut rng, image_size, k);
            let nfcs = NfcsScore::new(k).expect("k is drawn within 0..=5");
            let sample = Sample::new(
                image,
                format!("subject_{subject:03}"),
                "synthetic".into(),
                nfcs_hard_label(nfcs),
                Some(nfcs),
            )?;
            out.push((sample, regions));
        }
    }
    Ok(out)
}

/// [`generate_synthetic_with_regions`] without the geometry.
pub fn generate_synthetic(
    count_subjects: usize,
    images_per_subject: usize,
    image_size: usize,
    seed_value: u64,
) -> Result<Vec<Sample>> {
    Ok(
        generate_synthetic_with_regions(count_subjects, images_per_subject, image_size, seed_value)?
            .into_iter()
            .map(|(sample, _)| sample)
            .collect(),
    )
}

fn paint_face(
    rng: &mut rand_chacha::ChaCha8Rng,
    size: usize,
    blob_count: u8,
) -> (Tensor, Vec<BlobRegion>) {
    let s = size as f64;
    let mut values = vec![BACKGROUND; size * size];

    // Face oval.
    let (face_cx, face_cy) = (0.5 * s, 0.52 * s);
    let (face_rx, face_ry) = (0.34 * s, 0.42 * s);
    for y in 0..size {
        for x in 0..size {
            let dx = (x as f64 - face_cx) / face_rx;
            let dy = (y as f64 - face_cy) / face_ry;
            if dx * dx + dy * dy <= 1.0 {
                values[y * size + x] = FACE_TONE;
            }
        }
    }

    // Choose which canonical sites light up. Radii ranges are narrow enough
    // that blob count dominates total bright area: two large blobs still
    // cover less than three small ones.
    let mut site_order: Vec<usize> = (0..FAU_SITES.len()).collect();
    site_order.shuffle(rng);
    let mut regions = Vec::with_capacity(blob_count as usize);
    for &site in site_order.iter().take(blob_count as usize) {
        let (fx, fy) = FAU_SITES[site];
        let region = BlobRegion {
            center_x: fx * s + rng.gen_range(-0.02..0.02) * s,
            center_y: fy * s + rng.gen_range(-0.02..0.02) * s,
            radius_x: rng.gen_range(0.060..0.070) * s,
            radius_y: rng.gen_range(0.080..0.090) * s,
        };
        let intensity = rng.gen_range(0.85..0.95);
        let x_lo = (region.center_x - region.radius_x).floor().max(0.0) as usize;
        let x_hi = ((region.center_x + region.radius_x).ceil() as usize).min(size - 1);
        let y_lo = (region.center_y - region.radius_y).floor().max(0.0) as usize;
        let y_hi = ((region.center_y + region.radius_y).ceil() as usize).min(size - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                if region.contains(x as f64, y as f64) {
                    values[y * size + x] = intensity;
                }
            }
        }
        regions.push(region);
    }

    for v in values.iter_mut() {
        *v = (*v + rng.gen_range(-NOISE..NOISE)).clamp(0.0, 1.0);
    }

    (
        Tensor::new(vec![1, size, size], values).expect("shape matches construction"),
        regions,
    )
}

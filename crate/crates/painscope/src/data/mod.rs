//! Dataset handling: samples, manifests, synthetic generation,
//! augmentation, and subject-disjoint folds.
//!
//! Datasets are described by a line-delimited manifest; each line is a JSON
//! record with fields `image_path`, `subject_id`, `source`, `hard_label`
//! ("pain" | "no_pain"), and `nfcs` (integer 0..=5 or null). Image paths
//! resolve relative to the manifest's directory. PNG and PGM/PPM files are
//! accepted, 8-bit grayscale or RGB.

mod augment;
mod folds;
mod synthetic;

pub use augment::{
    apply_affine, augment, draw_affine, resize_bilinear, AffineParams, AugmentationConfig,
};
pub use folds::{make_folds, Fold, FoldPlan};
pub use synthetic::{generate_synthetic, generate_synthetic_with_regions, BlobRegion};

use crate::error::{Error, Result};
use crate::labels::{nfcs_hard_label, ClassLabel, NfcsScore};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// One labeled image.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Pixel data, `[C, S, S]`, values in [0,1].
    pub image: Tensor,
    pub subject_id: String,
    /// Dataset tag, e.g. "synthetic" or a clinical source name.
    pub source: String,
    pub hard_label: ClassLabel,
    /// Present when the image was scored on the five-unit facial scale.
    pub nfcs: Option<NfcsScore>,
}

impl Sample {
    /// Builds a sample, enforcing that any NFCS score agrees with the hard
    /// label (score >= 3 must mean Pain).
    pub fn new(
        image: Tensor,
        subject_id: String,
        source: String,
        hard_label: ClassLabel,
        nfcs: Option<NfcsScore>,
    ) -> Result<Self> {
        if let Some(score) = nfcs {
            if nfcs_hard_label(score) != hard_label {
                return Err(Error::Domain(format!(
                    "NFCS score {} implies {}, but hard label is {}",
                    score.value(),
                    nfcs_hard_label(score),
                    hard_label
                )));
            }
        }
        debug_assert!(
            image.values().iter().all(|&v| (0.0..=1.0).contains(&v)),
            "pixel values must stay in [0,1]"
        );
        Ok(Sample {
            image,
            subject_id,
            source,
            hard_label,
            nfcs,
        })
    }
}

/// On-disk manifest record; one JSON object per line.
#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    image_path: String,
    subject_id: String,
    source: String,
    hard_label: ClassLabel,
    nfcs: Option<u8>,
}

fn ingest_error(manifest: &Path, line: usize, details: impl std::fmt::Display) -> Error {
    Error::Ingest {
        path: manifest.to_path_buf(),
        details: format!("line {line}: {details}"),
    }
}

/// Reads a manifest, decoding and normalizing every referenced image to
/// `[input_channels, input_size, input_size]` with values in [0,1].
///
/// An empty manifest yields an empty list. Any malformed row, missing or
/// undecodable image, or label inconsistency fails with an ingestion error
/// naming the offending line.
pub fn load_manifest(
    manifest_path: &Path,
    input_size: usize,
    input_channels: usize,
) -> Result<Vec<Sample>> {
    if input_channels != 1 && input_channels != 3 {
        return Err(Error::Config(format!(
            "input_channels must be 1 or 3, got {input_channels}"
        )));
    }
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut samples = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(line)
            .map_err(|e| ingest_error(manifest_path, line_no, format!("malformed record: {e}")))?;

        let image_path = {
            let p = Path::new(&row.image_path);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let decoded = image::open(&image_path).map_err(|e| {
            ingest_error(
                manifest_path,
                line_no,
                format!("cannot read image {}: {e}", image_path.display()),
            )
        })?;
        let raw = decode_to_tensor(&decoded, input_channels);
        let resized = resize_bilinear(&raw, input_size, input_size)?;

        let nfcs = row
            .nfcs
            .map(NfcsScore::new)
            .transpose()
            .map_err(|e| ingest_error(manifest_path, line_no, e))?;
        let sample = Sample::new(resized, row.subject_id, row.source, row.hard_label, nfcs)
            .map_err(|e| ingest_error(manifest_path, line_no, e))?;
        samples.push(sample);
    }
    Ok(samples)
}

fn decode_to_tensor(decoded: &image::DynamicImage, channels: usize) -> Tensor {
    if channels == 1 {
        let gray = decoded.to_luma8();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let values: Vec<f64> = gray.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Tensor::new(vec![1, h, w], values).expect("decoder reports consistent dimensions")
    } else {
        let rgb = decoded.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        // Interleaved RGB becomes channel-first planes.
        let raw = rgb.as_raw();
        let mut values = vec![0.0; 3 * h * w];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    values[c * h * w + y * w + x] = f64::from(raw[(y * w + x) * 3 + c]) / 255.0;
                }
            }
        }
        Tensor::new(vec![3, h, w], values).expect("decoder reports consistent dimensions")
    }
}

/// Writes samples as 8-bit PNGs plus a manifest, returning the manifest
/// path. Layout: `dir/images/<subject>_<index>.png` and `dir/manifest.jsonl`.
/// Output bytes depend only on the samples, so identical datasets produce
/// identical files.
pub fn save_dataset(samples: &[Sample], dir: &Path) -> Result<PathBuf> {
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

    let manifest_path = dir.join("manifest.jsonl");
    let mut manifest = Vec::new();
    for (index, sample) in samples.iter().enumerate() {
        let file_name = format!("{}_{index:05}.png", sample.subject_id);
        let relative = format!("images/{file_name}");
        let path = images_dir.join(&file_name);
        write_png(&sample.image, &path)?;
        let row = ManifestRow {
            image_path: relative,
            subject_id: sample.subject_id.clone(),
            source: sample.source.clone(),
            hard_label: sample.hard_label,
            nfcs: sample.nfcs.map(NfcsScore::value),
        };
        let line = serde_json::to_string(&row).expect("manifest rows always serialize");
        manifest.extend_from_slice(line.as_bytes());
        manifest.push(b'\n');
    }
    let mut file =
        std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    file.write_all(&manifest)
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

fn write_png(image: &Tensor, path: &Path) -> Result<()> {
    let shape = image.shape();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let result = if c == 1 {
        let pixels: Vec<u8> = image.values().iter().map(|&v| quantize(v)).collect();
        image::GrayImage::from_raw(w as u32, h as u32, pixels)
            .expect("raw buffer sized from shape")
            .save(path)
    } else if c == 3 {
        let mut pixels = vec![0u8; 3 * h * w];
        for y in 0..h {
            for x in 0..w {
                for ch in 0..3 {
                    pixels[(y * w + x) * 3 + ch] = quantize(image.values()[ch * h * w + y * w + x]);
                }
            }
        }
        image::RgbImage::from_raw(w as u32, h as u32, pixels)
            .expect("raw buffer sized from shape")
            .save(path)
    } else {
        return Err(Error::Shape {
            op: "write_png",
            details: format!("cannot encode {c}-channel image"),
        });
    };
    result.map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        details: format!("encode failed: {e}"),
    })
}

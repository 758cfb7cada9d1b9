//! Attribution maps: Grad-CAM over the last convolutional layer and
//! Integrated Gradients over input pixels.
//!
//! Both methods differentiate the pre-softmax logit of the target class.
//! Probabilities would multiply every gradient by a softmax Jacobian that
//! vanishes as the model grows confident, which is exactly when attributions
//! are wanted.

use crate::data::resize_bilinear;
use crate::error::{Error, Result};
use crate::labels::ClassLabel;
use crate::model::{DropoutMode, Model};
use crate::tensor::{Tape, Tensor};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Default Riemann-sum resolution for Integrated Gradients.
pub const DEFAULT_IG_STEPS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    GradCam,
    IntegratedGradients,
}

impl fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributionMethod::GradCam => "grad_cam",
            AttributionMethod::IntegratedGradients => "integrated_gradients",
        })
    }
}

/// A spatial attribution grid aligned to the input image.
#[derive(Debug, Clone)]
pub struct AttributionMap {
    /// Shape [S, S], matching the input's spatial extent.
    pub values: Tensor,
    pub target_class: ClassLabel,
    pub method: AttributionMethod,
    /// Softmax probability of the target class on the attributed image.
    pub source_confidence: f64,
    /// Set when every value is zero (for Grad-CAM this means the target
    /// logit had no gradient onto the feature maps, or the weighted map
    /// was entirely non-positive).
    pub all_zero: bool,
}

/// Channel-weighted activation sum with the weights' ReLU applied:
/// `relu(sum_c mean(grads_c) * activation_c)` per spatial cell.
fn weighted_cam(activation: &[f64], grads: &[f64], channels: usize, cells: usize) -> Vec<f64> {
    let mut map = vec![0.0; cells];
    for channel in 0..channels {
        let plane = &grads[channel * cells..(channel + 1) * cells];
        let weight = plane.iter().sum::<f64>() / cells as f64;
        let activation_plane = &activation[channel * cells..(channel + 1) * cells];
        for (out, &a) in map.iter_mut().zip(activation_plane) {
            *out += weight * a;
        }
    }
    for value in &mut map {
        *value = value.max(0.0);
    }
    map
}

/// Grad-CAM on the model's designated last convolutional layer, upsampled
/// to the input extent and max-normalized to [0,1] when any mass exists.
pub fn grad_cam(model: &Model, image: &Tensor, target_class: ClassLabel) -> Result<AttributionMap> {
    let mut tape = Tape::new();
    let binding = model.bind(&mut tape);
    let trace = model.forward(&mut tape, &binding, image, DropoutMode::Disabled)?;
    let logit = tape.select(trace.logits, target_class.index())?;
    tape.backward(logit)?;

    let source_confidence = tape.values(trace.probabilities)[target_class.index()];
    let shape = tape.shape(trace.last_conv_activation).to_vec();
    let (channels, height, width) = (shape[0], shape[1], shape[2]);
    let activation = tape.values(trace.last_conv_activation);
    let grads = tape.grad(trace.last_conv_activation);
    let coarse = weighted_cam(activation, grads, channels, height * width);

    let size = model.config().input_size;
    let coarse = Tensor::new(vec![1, height, width], coarse)?;
    let upsampled = resize_bilinear(&coarse, size, size)?;
    let mut values = upsampled.values().to_vec();
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let all_zero = max == 0.0;
    if !all_zero {
        for value in &mut values {
            *value /= max;
        }
    }
    Ok(AttributionMap {
        values: Tensor::new(vec![size, size], values)?,
        target_class,
        method: AttributionMethod::GradCam,
        source_confidence,
        all_zero,
    })
}

/// Right Riemann sum of gradients along the straight path from `baseline`
/// to `image`, scaled by the displacement. The gradient callback receives
/// each path point flattened and returns (gradient, value) of the function
/// being attributed at that point; the value of the last step (the image
/// itself) is handed back for diagnostics.
pub fn integrate_path_gradients<F>(
    image: &[f64],
    baseline: &[f64],
    steps: usize,
    mut gradient_at: F,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<(Vec<f64>, f64)>,
{
    if image.len() != baseline.len() {
        return Err(Error::Shape {
            op: "integrated_gradients",
            details: format!(
                "image has {} values, baseline has {}",
                image.len(),
                baseline.len()
            ),
        });
    }
    if steps == 0 {
        return Err(Error::Config(
            "integrated gradients need at least one step".into(),
        ));
    }
    let mut accumulated = vec![0.0; image.len()];
    let mut value_at_image = 0.0;
    let mut point = vec![0.0; image.len()];
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        for ((p, &x), &b) in point.iter_mut().zip(image).zip(baseline) {
            *p = b + alpha * (x - b);
        }
        let (gradient, value) = gradient_at(&point)?;
        if gradient.len() != image.len() {
            return Err(Error::Shape {
                op: "integrated_gradients",
                details: format!(
                    "gradient has {} values, input has {}",
                    gradient.len(),
                    image.len()
                ),
            });
        }
        for (acc, g) in accumulated.iter_mut().zip(&gradient) {
            *acc += g;
        }
        if k == steps {
            value_at_image = value;
        }
    }
    for ((acc, &x), &b) in accumulated.iter_mut().zip(image).zip(baseline) {
        *acc = (x - b) * *acc / steps as f64;
    }
    Ok((accumulated, value_at_image))
}

/// Integrated Gradients toward the target class logit, collapsed over
/// channels into a spatial grid. `baseline` defaults to the all-zero image
/// when `None`; `steps` defaults to [`DEFAULT_IG_STEPS`].
pub fn integrated_gradients(
    model: &Model,
    image: &Tensor,
    baseline: Option<&Tensor>,
    target_class: ClassLabel,
    steps: usize,
) -> Result<AttributionMap> {
    let zero_baseline;
    let baseline = match baseline {
        Some(tensor) => tensor,
        None => {
            zero_baseline = Tensor::zeros(image.shape().to_vec());
            &zero_baseline
        }
    };
    if baseline.shape() != image.shape() {
        return Err(Error::Shape {
            op: "integrated_gradients",
            details: format!(
                "baseline shape {:?} does not match image shape {:?}",
                baseline.shape(),
                image.shape()
            ),
        });
    }
    let shape = image.shape().to_vec();
    let mut source_confidence = 0.0;
    let gradient_at = |flat: &[f64]| -> Result<(Vec<f64>, f64)> {
        let point = Tensor::new(shape.clone(), flat.to_vec())?;
        let mut tape = Tape::new();
        let binding = model.bind(&mut tape);
        let trace = model.forward(&mut tape, &binding, &point, DropoutMode::Disabled)?;
        let logit = tape.select(trace.logits, target_class.index())?;
        tape.backward(logit)?;
        source_confidence = tape.values(trace.probabilities)[target_class.index()];
        Ok((
            tape.grad(trace.input).to_vec(),
            tape.values(logit)[0],
        ))
    };
    let (attributions, _) =
        integrate_path_gradients(image.values(), baseline.values(), steps, gradient_at)?;

    // Collapse channels onto the spatial grid.
    let (channels, height, width) = (shape[0], shape[1], shape[2]);
    let cells = height * width;
    let mut grid = vec![0.0; cells];
    for channel in 0..channels {
        for (out, &a) in grid
            .iter_mut()
            .zip(&attributions[channel * cells..(channel + 1) * cells])
        {
            *out += a;
        }
    }
    let all_zero = grid.iter().all(|&v| v == 0.0);
    Ok(AttributionMap {
        values: Tensor::new(vec![height, width], grid)?,
        target_class,
        method: AttributionMethod::IntegratedGradients,
        source_confidence,
        all_zero,
    })
}

/// Target-class logit and its input gradient, exposed for completeness
/// checks: IG attributions over the full path must sum to
/// `logit(image) - logit(baseline)`.
pub fn target_logit(model: &Model, image: &Tensor, target_class: ClassLabel) -> Result<f64> {
    let mut tape = Tape::new();
    let binding = model.bind(&mut tape);
    let trace = model.forward(&mut tape, &binding, image, DropoutMode::Disabled)?;
    let logit = tape.select(trace.logits, target_class.index())?;
    Ok(tape.values(logit)[0])
}

fn quantize(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Map values rescaled to [0,1] for rendering. Signed maps (Integrated
/// Gradients) are normalized symmetrically around zero so that sign
/// survives as dark-vs-light; non-negative maps keep their scale.
fn render_scale(values: &[f64]) -> Vec<f64> {
    let max_abs = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs == 0.0 {
        return vec![0.0; values.len()];
    }
    let has_negative = values.iter().any(|&v| v < 0.0);
    values
        .iter()
        .map(|&v| {
            if has_negative {
                0.5 + v / (2.0 * max_abs)
            } else {
                v / max_abs
            }
        })
        .collect()
}

/// The three files one export writes.
#[derive(Debug, Clone)]
pub struct AttributionFiles {
    pub mask: PathBuf,
    pub overlay: PathBuf,
    pub csv: PathBuf,
}

/// Appends a suffix to a path verbatim. `Path::with_extension` would
/// truncate stems that contain dots (confidence values in file names).
fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes `{stem}.mask.png` (the rendered map), `{stem}.overlay.png` (map
/// alpha-blended at 0.5 over the input), and `{stem}.csv` (raw values, one
/// row per scanline). The CSV preserves values exactly.
pub fn export_attribution(
    map: &AttributionMap,
    image: &Tensor,
    stem: &Path,
) -> Result<AttributionFiles> {
    let (height, width) = (map.values.shape()[0], map.values.shape()[1]);
    if image.shape()[1] != height || image.shape()[2] != width {
        return Err(Error::Shape {
            op: "export_attribution",
            details: format!(
                "map extent {height}x{width} does not match image shape {:?}",
                image.shape()
            ),
        });
    }
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.to_path_buf(), e))?;
        }
    }
    let rendered = render_scale(map.values.values());

    let mask_path = with_suffix(stem, ".mask.png");
    let mask = image::GrayImage::from_fn(width as u32, height as u32, |x, y| {
        image::Luma([quantize(rendered[y as usize * width + x as usize])])
    });
    mask.save(&mask_path)
        .map_err(|e| Error::Format {
            path: mask_path.clone(),
            details: e.to_string(),
        })?;

    // Overlay: blend the rendered map into the image's mean channel.
    let channels = image.shape()[0];
    let cells = height * width;
    let overlay_path = with_suffix(stem, ".overlay.png");
    let overlay = image::GrayImage::from_fn(width as u32, height as u32, |x, y| {
        let cell = y as usize * width + x as usize;
        let mut pixel = 0.0;
        for channel in 0..channels {
            pixel += image.values()[channel * cells + cell];
        }
        pixel /= channels as f64;
        image::Luma([quantize(0.5 * pixel + 0.5 * rendered[cell])])
    });
    overlay
        .save(&overlay_path)
        .map_err(|e| Error::Format {
            path: overlay_path.clone(),
            details: e.to_string(),
        })?;

    let csv_path = with_suffix(stem, ".csv");
    let mut csv = String::new();
    for row in 0..height {
        for col in 0..width {
            if col > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{}", map.values.values()[row * width + col]));
        }
        csv.push('\n');
    }
    fs::write(&csv_path, csv).map_err(|e| Error::io(csv_path.clone(), e))?;
    Ok(AttributionFiles {
        mask: mask_path,
        overlay: overlay_path,
        csv: csv_path,
    })
}

/// Reads a map CSV written by [`export_attribution`] back into a tensor.
pub fn read_attribution_csv(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    let mut rows = Vec::new();
    let mut width = None;
    for (index, line) in text.lines().enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    details: format!("line {}: bad value {cell:?}", index + 1),
                })
            })
            .collect::<Result<_>>()?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                details: format!("line {}: ragged row", index + 1),
            });
        }
        rows.push(row);
    }
    let width = width.unwrap_or(0);
    if rows.is_empty() || width == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            details: "empty attribution grid".into(),
        });
    }
    Tensor::new(vec![rows.len(), width], rows.concat())
}

//! Affine image augmentation with bilinear resampling.
//!
//! Each augmented image applies one random affine compose (shift, rotation,
//! shear, zoom, optional horizontal flip) followed by brightness scaling
//! with a clamp to [0,1]. Sampling is bilinear with reflect padding, which
//! avoids the black corners plain zero-padding would leak into the class
//! signal.

use super::Sample;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parameter ranges for one augmentation pass. Every parameter is drawn
/// uniformly within its range per generated image.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    /// Number of augmented images generated per source image.
    pub count: usize,
    /// Maximum shift along each axis, as a fraction of the image side.
    pub shift_fraction: f64,
    /// Maximum rotation magnitude in degrees.
    pub rotation_degrees: f64,
    /// Maximum horizontal shear coefficient magnitude.
    pub shear: f64,
    /// Brightness multiplier range (low, high).
    pub brightness: (f64, f64),
    /// Zoom factor range (low, high); factors above 1 magnify content.
    pub zoom: (f64, f64),
    /// Whether a horizontal flip is drawn (fair coin) per image.
    pub horizontal_flip: bool,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            count: 20,
            shift_fraction: 0.20,
            rotation_degrees: 30.0,
            shear: 0.15,
            brightness: (0.50, 1.10),
            zoom: (0.70, 1.50),
            horizontal_flip: true,
        }
    }
}

impl AugmentationConfig {
    /// All-identity configuration: useful as a base for partial overrides
    /// and for tests that need bitwise copies.
    pub fn identity(count: usize) -> Self {
        AugmentationConfig {
            count,
            shift_fraction: 0.0,
            rotation_degrees: 0.0,
            shear: 0.0,
            brightness: (1.0, 1.0),
            zoom: (1.0, 1.0),
            horizontal_flip: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shift_fraction < 0.0 || self.rotation_degrees < 0.0 || self.shear < 0.0 {
            return Err(Error::Config(
                "augmentation magnitudes must be nonnegative".into(),
            ));
        }
        for (name, (lo, hi)) in [("brightness", self.brightness), ("zoom", self.zoom)] {
            if lo > hi || lo < 0.0 {
                return Err(Error::Config(format!(
                    "{name} range ({lo}, {hi}) is not an ascending nonnegative interval"
                )));
            }
        }
        if self.zoom.0 <= 0.0 {
            return Err(Error::Config("zoom must stay positive".into()));
        }
        Ok(())
    }
}

/// One concrete affine draw. Shifts are in pixels; rotation is in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub shift_x: f64,
    pub shift_y: f64,
    pub rotation_degrees: f64,
    pub shear: f64,
    pub zoom: f64,
    pub flip: bool,
    pub brightness: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        shift_x: 0.0,
        shift_y: 0.0,
        rotation_degrees: 0.0,
        shear: 0.0,
        zoom: 1.0,
        flip: false,
        brightness: 1.0,
    };
}

/// Mirrors an index into [0, n-1], reflecting about the edge pixels
/// (index -1 maps to 1, index n maps to n-2).
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Bilinear sample of one channel at fractional coordinates.
fn sample_bilinear(channel: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as isize;
    let y0 = y0 as isize;
    let idx = |yy: isize, xx: isize| channel[reflect(yy, h) * w + reflect(xx, w)];
    let top = idx(y0, x0) * (1.0 - fx) + idx(y0, x0 + 1) * fx;
    let bottom = idx(y0 + 1, x0) * (1.0 - fx) + idx(y0 + 1, x0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Applies one affine compose plus brightness to a [C,H,W] image.
///
/// Content maps forward as `p_out = R(theta) Sh(s) Z(z) F (p_in - c) + c + t`
/// about the image center `c`; resampling walks the inverse of that map.
/// Brightness multiplies after resampling and the result clamps to [0,1].
pub fn apply_affine(image: &Tensor, params: &AffineParams) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 3 {
        return Err(Error::Shape {
            op: "apply_affine",
            details: format!("need [C,H,W] image, got {shape:?}"),
        });
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;

    let theta = params.rotation_degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let z = params.zoom;
    let s = params.shear;
    let fx = if params.flip { -1.0 } else { 1.0 };

    // Forward 2x2: rotation . shear . zoom . flip, applied in that order to
    // centered coordinates (x right, y down).
    //   shear:  x' = x + s*y
    //   zoom:   scales both axes by z
    //   flip:   mirrors x
    let m00 = cos * z * fx;
    let m01 = (cos * s - sin) * z;
    let m10 = sin * z * fx;
    let m11 = (sin * s + cos) * z;
    let det = m00 * m11 - m01 * m10;
    if det.abs() < 1e-12 {
        return Err(Error::Config(format!(
            "affine transform is singular (zoom {z}, shear {s})"
        )));
    }
    let i00 = m11 / det;
    let i01 = -m01 / det;
    let i10 = -m10 / det;
    let i11 = m00 / det;

    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        let src = &image.values()[ci * h * w..(ci + 1) * h * w];
        let dst = &mut out[ci * h * w..(ci + 1) * h * w];
        for oy in 0..h {
            for ox in 0..w {
                let rx = ox as f64 - cx - params.shift_x;
                let ry = oy as f64 - cy - params.shift_y;
                let sx = i00 * rx + i01 * ry + cx;
                let sy = i10 * rx + i11 * ry + cy;
                let v = sample_bilinear(src, h, w, sy, sx) * params.brightness;
                dst[oy * w + ox] = v.clamp(0.0, 1.0);
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Uniform draw tolerating a degenerate (point) range.
fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Draws one parameter set. Draw order is fixed (shifts, rotation, shear,
/// zoom, flip, brightness) so streams replay identically across runs.
pub fn draw_affine(rng: &mut ChaCha8Rng, config: &AugmentationConfig, side: usize) -> AffineParams {
    let max_shift = config.shift_fraction * side as f64;
    AffineParams {
        shift_x: draw(rng, -max_shift, max_shift),
        shift_y: draw(rng, -max_shift, max_shift),
        rotation_degrees: draw(rng, -config.rotation_degrees, config.rotation_degrees),
        shear: draw(rng, -config.shear, config.shear),
        zoom: draw(rng, config.zoom.0, config.zoom.1),
        flip: config.horizontal_flip && rng.gen::<bool>(),
        brightness: draw(rng, config.brightness.0, config.brightness.1),
    }
}

/// Generates `config.count` augmented copies of a sample. Labels, subject,
/// and NFCS score carry over verbatim; only pixels change.
pub fn augment(sample: &Sample, config: &AugmentationConfig, seed_value: u64) -> Result<Vec<Sample>> {
    config.validate()?;
    let side = sample.image.shape()[1];
    let mut rng = seed::stream(seed_value, "augment", &[]);
    let mut out = Vec::with_capacity(config.count);
    for _ in 0..config.count {
        let params = draw_affine(&mut rng, config, side);
        let image = apply_affine(&sample.image, &params)?;
        out.push(Sample {
            image,
            subject_id: sample.subject_id.clone(),
            source: sample.source.clone(),
            hard_label: sample.hard_label,
            nfcs: sample.nfcs,
        });
    }
    Ok(out)
}

/// Resizes a [C,H,W] image with bilinear interpolation on half-pixel
/// centers. A same-size request returns an identical copy.
pub fn resize_bilinear(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 3 {
        return Err(Error::Shape {
            op: "resize_bilinear",
            details: format!("need [C,H,W] image, got {shape:?}"),
        });
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if out_h == 0 || out_w == 0 {
        return Err(Error::Config("resize target must be positive".into()));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(image.clone());
    }
    let scale_y = h as f64 / out_h as f64;
    let scale_x = w as f64 / out_w as f64;
    let mut out = vec![0.0; c * out_h * out_w];
    for ci in 0..c {
        let src = &image.values()[ci * h * w..(ci + 1) * h * w];
        let dst = &mut out[ci * out_h * out_w..(ci + 1) * out_h * out_w];
        for oy in 0..out_h {
            let sy = (oy as f64 + 0.5) * scale_y - 0.5;
            for ox in 0..out_w {
                let sx = (ox as f64 + 0.5) * scale_x - 0.5;
                dst[oy * out_w + ox] = sample_bilinear(src, h, w, sy, sx);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

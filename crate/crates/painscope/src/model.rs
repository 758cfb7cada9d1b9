//! Configurable shallow CNN with a two-neuron softmax head.
//!
//! The reference shape runs three parallel branches over the input (a bare
//! maxpool, a wide-kernel conv+pool, and a narrow-kernel conv+pool),
//! concatenates them on channels, applies one more conv+pool (the layer
//! watched by Grad-CAM), then a small dense layer with dropout and the
//! softmax head. Branch convolutions use same-padding so the three branch
//! outputs share spatial extent. This shape is a configurable stand-in
//! chosen for this toolkit, not a restatement of any published layer table.
//!
//! All pooling is window 2, stride 2. Weights draw from He-uniform
//! `U(-sqrt(6/fan_in), sqrt(6/fan_in))`; biases start at zero.

use crate::error::{Error, Result};
use crate::labels::{LabelDistribution, LabelMode};
use crate::seed;
use crate::tensor::{Tape, Tensor, ValueId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Hyperparameters fixing the network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Side length of the square input image.
    pub input_size: usize,
    /// 1 for grayscale, 3 for RGB.
    pub input_channels: usize,
    /// Filter count of the wide-kernel branch.
    pub wide_filters: usize,
    /// Kernel side of the wide-kernel branch (odd, for same-padding).
    pub wide_kernel: usize,
    /// Filter count of the narrow-kernel branch.
    pub narrow_filters: usize,
    /// Kernel side of the narrow-kernel branch (odd).
    pub narrow_kernel: usize,
    /// Filter count of the post-concat conv layer (the Grad-CAM target).
    pub last_conv_filters: usize,
    /// Kernel side of the post-concat conv layer (odd).
    pub last_conv_kernel: usize,
    /// Width of the dense layer between features and the head.
    pub dense_width: usize,
    /// Dropout probability on the dense activation during training.
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: 120,
            input_channels: 1,
            wide_filters: 64,
            wide_kernel: 5,
            narrow_filters: 32,
            narrow_kernel: 3,
            last_conv_filters: 64,
            last_conv_kernel: 3,
            dense_width: 8,
            dropout_rate: 0.5,
        }
    }
}

impl ModelConfig {
    /// Spatial side of the branch outputs after their pool.
    pub fn branch_extent(&self) -> usize {
        self.input_size / 2
    }

    /// Spatial side of the last conv layer's pooled output.
    pub fn feature_extent(&self) -> usize {
        self.branch_extent() / 2
    }

    /// Channel count after branch concatenation.
    pub fn concat_channels(&self) -> usize {
        self.input_channels + self.wide_filters + self.narrow_filters
    }

    /// Length of the flattened feature vector feeding the dense layer.
    pub fn flat_features(&self) -> usize {
        self.last_conv_filters * self.feature_extent() * self.feature_extent()
    }

    /// Checks that the layer chain keeps a positive spatial extent and all
    /// sizes are usable.
    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::Config("input_channels must be positive".into()));
        }
        if self.input_size < 4 {
            return Err(Error::Config(format!(
                "input_size {} collapses below 1 pixel after two pooling stages",
                self.input_size
            )));
        }
        for (name, kernel) in [
            ("wide_kernel", self.wide_kernel),
            ("narrow_kernel", self.narrow_kernel),
            ("last_conv_kernel", self.last_conv_kernel),
        ] {
            if kernel == 0 || kernel % 2 == 0 {
                return Err(Error::Config(format!(
                    "{name} must be odd and positive for same-padding, got {kernel}"
                )));
            }
        }
        if self.wide_kernel > self.input_size || self.narrow_kernel > self.input_size {
            return Err(Error::Config(format!(
                "branch kernels ({}, {}) exceed the input extent {}",
                self.wide_kernel, self.narrow_kernel, self.input_size
            )));
        }
        if self.last_conv_kernel > self.branch_extent() {
            return Err(Error::Config(format!(
                "last_conv_kernel {} exceeds the branch output extent {}",
                self.last_conv_kernel,
                self.branch_extent()
            )));
        }
        if self.wide_filters == 0
            || self.narrow_filters == 0
            || self.last_conv_filters == 0
            || self.dense_width == 0
        {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0,1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Parameter names and shapes implied by this config, in storage order.
    pub fn parameter_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let c = self.input_channels;
        vec![
            (
                "wide.kernels",
                vec![self.wide_filters, c, self.wide_kernel, self.wide_kernel],
            ),
            ("wide.bias", vec![self.wide_filters]),
            (
                "narrow.kernels",
                vec![
                    self.narrow_filters,
                    c,
                    self.narrow_kernel,
                    self.narrow_kernel,
                ],
            ),
            ("narrow.bias", vec![self.narrow_filters]),
            (
                "last_conv.kernels",
                vec![
                    self.last_conv_filters,
                    self.concat_channels(),
                    self.last_conv_kernel,
                    self.last_conv_kernel,
                ],
            ),
            ("last_conv.bias", vec![self.last_conv_filters]),
            ("dense.weights", vec![self.dense_width, self.flat_features()]),
            ("dense.bias", vec![self.dense_width]),
            ("head.weights", vec![2, self.dense_width]),
            ("head.bias", vec![2]),
        ]
    }
}

/// The classifier: a config plus named parameter tensors in a fixed order.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: Vec<(String, Tensor)>,
}

/// Parameter leaves registered on a tape, parallel to [`Model::params`].
pub struct Binding {
    ids: Vec<ValueId>,
}

impl Binding {
    pub fn ids(&self) -> &[ValueId] {
        &self.ids
    }
}

/// Handles on the interesting intermediate values of one forward pass.
pub struct ForwardTrace {
    /// The image leaf.
    pub input: ValueId,
    /// Post-ReLU activation of the last conv layer, before its pool.
    pub last_conv_activation: ValueId,
    /// Pre-softmax logits, length 2.
    pub logits: ValueId,
    /// Softmax output, length 2.
    pub probabilities: ValueId,
}

/// Whether a forward pass samples dropout.
pub enum DropoutMode<'r> {
    /// Inference: dropout layers pass values through unchanged.
    Disabled,
    /// Training: dense activations are masked from this stream.
    Sampled(&'r mut ChaCha8Rng),
}

impl Model {
    /// Initializes all parameters from the seed (He-uniform weights, zero
    /// biases). The same config and seed always produce identical bits.
    pub fn build(config: ModelConfig, seed_value: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = seed::stream(seed_value, "model-init", &[]);
        let mut params = Vec::new();
        for (name, shape) in config.parameter_shapes() {
            let tensor = if name.ends_with(".bias") {
                Tensor::zeros(shape)
            } else {
                let fan_in = match shape.len() {
                    // Conv kernels [F, C, kH, kW] see C*kH*kW inputs.
                    4 => shape[1] * shape[2] * shape[3],
                    // Dense weights [M, N] see N inputs.
                    2 => shape[1],
                    _ => unreachable!("weights are rank 2 or 4"),
                };
                let limit = (6.0 / fan_in as f64).sqrt();
                let len: usize = shape.iter().product();
                let values = (0..len).map(|_| rng.gen_range(-limit..limit)).collect();
                Tensor::new(shape, values)?
            };
            params.push((name.to_string(), tensor));
        }
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Named parameters in storage order.
    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    /// Mutable access for the optimizer; order matches [`Binding::ids`].
    pub fn params_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.params
    }

    /// Registers every parameter as a leaf on the tape.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        Binding {
            ids: self.params.iter().map(|(_, t)| tape.leaf(t)).collect(),
        }
    }

    fn id(&self, binding: &Binding, name: &str) -> ValueId {
        let index = self
            .params
            .iter()
            .position(|(n, _)| n == name)
            .expect("parameter names are fixed at build time");
        binding.ids[index]
    }

    /// Records one forward pass on the tape.
    pub fn forward(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        image: &Tensor,
        mut dropout: DropoutMode,
    ) -> Result<ForwardTrace> {
        let cfg = &self.config;
        let expected = [cfg.input_channels, cfg.input_size, cfg.input_size];
        if image.shape() != expected {
            return Err(Error::Shape {
                op: "forward",
                details: format!("input {:?}, model expects {:?}", image.shape(), expected),
            });
        }
        let input = tape.leaf(image);

        // Branch A: bare pooling keeps the raw intensities in the mix.
        let pooled_input = tape.maxpool2d(input, 2, 2)?;

        // Branch B: wide-kernel conv, same-padded, then pool.
        let wide_pad = (cfg.wide_kernel - 1) / 2;
        let wide_k = self.id(binding, "wide.kernels");
        let wide_b = self.id(binding, "wide.bias");
        let wide = tape.conv2d(input, wide_k, wide_b, 1, wide_pad)?;
        let wide = tape.relu(wide);
        let wide = tape.maxpool2d(wide, 2, 2)?;

        // Branch C: narrow-kernel conv, same-padded, then pool.
        let narrow_pad = (cfg.narrow_kernel - 1) / 2;
        let narrow_k = self.id(binding, "narrow.kernels");
        let narrow_b = self.id(binding, "narrow.bias");
        let narrow = tape.conv2d(input, narrow_k, narrow_b, 1, narrow_pad)?;
        let narrow = tape.relu(narrow);
        let narrow = tape.maxpool2d(narrow, 2, 2)?;

        let merged = tape.concat_channels(&[pooled_input, wide, narrow])?;

        let last_pad = (cfg.last_conv_kernel - 1) / 2;
        let last_k = self.id(binding, "last_conv.kernels");
        let last_b = self.id(binding, "last_conv.bias");
        let last = tape.conv2d(merged, last_k, last_b, 1, last_pad)?;
        let last_conv_activation = tape.relu(last);
        let features = tape.maxpool2d(last_conv_activation, 2, 2)?;
        let flat = tape.flatten(features);

        let dense_w = self.id(binding, "dense.weights");
        let dense_b = self.id(binding, "dense.bias");
        let hidden = tape.dense(flat, dense_w, dense_b)?;
        let hidden = tape.relu(hidden);
        let hidden = match &mut dropout {
            DropoutMode::Disabled => hidden,
            DropoutMode::Sampled(rng) => {
                let rate = cfg.dropout_rate;
                let keep_scale = 1.0 / (1.0 - rate);
                let mask: Vec<f64> = (0..cfg.dense_width)
                    .map(|_| {
                        if rng.gen::<f64>() < rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                tape.dropout(hidden, mask)?
            }
        };

        let head_w = self.id(binding, "head.weights");
        let head_b = self.id(binding, "head.bias");
        let logits = tape.dense(hidden, head_w, head_b)?;
        let probabilities = tape.softmax(logits)?;

        Ok(ForwardTrace {
            input,
            last_conv_activation,
            logits,
            probabilities,
        })
    }

    /// Inference: one forward pass with dropout disabled.
    pub fn predict(&self, image: &Tensor) -> Result<LabelDistribution> {
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape);
        let trace = self.forward(&mut tape, &binding, image, DropoutMode::Disabled)?;
        let probs = tape.values(trace.probabilities);
        LabelDistribution::new(probs[0], probs[1])
    }
}

/// Fields persisted alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub seed: u64,
    pub fold: usize,
    pub label_mode: LabelMode,
    pub epoch: usize,
    pub test_loss: f64,
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"PAINSCKP";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes the model as a versioned binary file.
///
/// Layout: 8-byte magic, u32 version, length-prefixed config JSON,
/// length-prefixed metadata JSON, then named parameter records. Weights are
/// stored as 32-bit little-endian floats; loading therefore reproduces
/// predictions to single precision, not bit-exactly.
pub fn save_checkpoint(model: &Model, path: &Path, metadata: &CheckpointMetadata) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());

    let config_json =
        serde_json::to_vec(model.config()).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            details: format!("config serialization failed: {e}"),
        })?;
    buf.extend_from_slice(&(config_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&config_json);

    let meta_json = serde_json::to_vec(metadata).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        details: format!("metadata serialization failed: {e}"),
    })?;
    buf.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta_json);

    buf.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for (name, tensor) in model.params() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &dim in tensor.shape() {
            buf.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for &v in tensor.values() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    cursor: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.cursor + n > self.bytes.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                details: format!("truncated while reading {what}"),
            });
        }
        let slice = &self.bytes[self.cursor..self.cursor + n];
        self.cursor += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint written by [`save_checkpoint`], validating magic,
/// version, and every parameter shape against the stored config.
pub fn load_checkpoint(path: &Path) -> Result<(Model, CheckpointMetadata)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        cursor: 0,
        path,
    };

    let magic = r.take(8, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            details: format!("bad magic {magic:?}"),
        });
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            path: path.to_path_buf(),
            details: format!("unsupported version {version}"),
        });
    }

    let config_len = r.u64("config length")? as usize;
    let config: ModelConfig =
        serde_json::from_slice(r.take(config_len, "config")?).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            details: format!("config json: {e}"),
        })?;
    config.validate()?;

    let meta_len = r.u64("metadata length")? as usize;
    let metadata: CheckpointMetadata =
        serde_json::from_slice(r.take(meta_len, "metadata")?).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            details: format!("metadata json: {e}"),
        })?;

    let expected = config.parameter_shapes();
    let count = r.u32("parameter count")? as usize;
    if count != expected.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            details: format!("expected {} parameters, found {count}", expected.len()),
        });
    }

    let mut params = Vec::with_capacity(count);
    for (expected_name, expected_shape) in expected {
        let name_len = r.u32("parameter name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "parameter name")?)
            .map_err(|_| Error::Format {
                path: path.to_path_buf(),
                details: "parameter name is not utf-8".into(),
            })?
            .to_string();
        if name != expected_name {
            return Err(Error::Format {
                path: path.to_path_buf(),
                details: format!("expected parameter {expected_name:?}, found {name:?}"),
            });
        }
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("dimension")? as usize);
        }
        if shape != expected_shape {
            return Err(Error::Format {
                path: path.to_path_buf(),
                details: format!(
                    "parameter {name} has shape {shape:?}, config implies {expected_shape:?}"
                ),
            });
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4, "weights")?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        params.push((name, Tensor::new(shape, values)?));
    }

    Ok((Model { config, params }, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelMode;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            input_size: 12,
            input_channels: 1,
            wide_filters: 3,
            wide_kernel: 5,
            narrow_filters: 2,
            narrow_kernel: 3,
            last_conv_filters: 4,
            last_conv_kernel: 3,
            dense_width: 5,
            dropout_rate: 0.5,
        }
    }

    fn random_image(rng: &mut ChaCha8Rng, config: &ModelConfig) -> Tensor {
        let len = config.input_channels * config.input_size * config.input_size;
        Tensor::new(
            vec![config.input_channels, config.input_size, config.input_size],
            (0..len).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn build_is_deterministic() {
        let a = Model::build(tiny_config(), 9).unwrap();
        let b = Model::build(tiny_config(), 9).unwrap();
        for ((na, ta), (nb, tb)) in a.params().iter().zip(b.params()) {
            assert_eq!(na, nb);
            assert_eq!(ta.values(), tb.values());
        }
        let c = Model::build(tiny_config(), 10).unwrap();
        assert_ne!(
            a.params()[0].1.values(),
            c.params()[0].1.values(),
            "different seeds must differ"
        );
    }

    #[test]
    fn biases_start_at_zero_and_weights_stay_in_he_bounds() {
        let model = Model::build(tiny_config(), 3).unwrap();
        for (name, tensor) in model.params() {
            if name.ends_with(".bias") {
                assert!(tensor.values().iter().all(|&v| v == 0.0), "{name}");
            } else {
                let fan_in = match tensor.shape().len() {
                    4 => tensor.shape()[1] * tensor.shape()[2] * tensor.shape()[3],
                    _ => tensor.shape()[1],
                };
                let limit = (6.0 / fan_in as f64).sqrt();
                assert!(
                    tensor.values().iter().all(|&v| v.abs() < limit),
                    "{name} exceeds He-uniform bound"
                );
            }
        }
    }

    #[test]
    fn predict_returns_a_probability_vector() {
        let config = tiny_config();
        let model = Model::build(config.clone(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let image = random_image(&mut rng, &config);
        let dist = model.predict(&image).unwrap();
        assert!((dist.p_no_pain + dist.p_pain - 1.0).abs() <= 1e-9);
        assert!(dist.p_no_pain > 0.0 && dist.p_pain > 0.0);
        let again = model.predict(&image).unwrap();
        assert_eq!(dist, again, "inference must be deterministic");
    }

    #[test]
    fn predict_rejects_wrong_input_shape() {
        let model = Model::build(tiny_config(), 4).unwrap();
        let bad = Tensor::zeros(vec![1, 8, 8]);
        assert!(model.predict(&bad).is_err());
    }

    #[test]
    fn config_errors_when_spatial_extent_collapses() {
        let mut config = tiny_config();
        config.input_size = 2;
        assert!(Model::build(config, 1).is_err());

        let mut config = tiny_config();
        config.last_conv_kernel = 21;
        assert!(Model::build(config, 1).is_err());

        let mut config = tiny_config();
        config.wide_kernel = 4; // even kernels cannot be same-padded
        assert!(Model::build(config, 1).is_err());
    }

    #[test]
    fn zero_dropout_matches_eval_mode_bitwise() {
        let config = ModelConfig {
            dropout_rate: 0.0,
            ..tiny_config()
        };
        let model = Model::build(config.clone(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let image = random_image(&mut rng, &config);

        let mut eval_tape = Tape::new();
        let binding = model.bind(&mut eval_tape);
        let eval = model
            .forward(&mut eval_tape, &binding, &image, DropoutMode::Disabled)
            .unwrap();

        let mut train_tape = Tape::new();
        let binding = model.bind(&mut train_tape);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(42);
        let train = model
            .forward(
                &mut train_tape,
                &binding,
                &image,
                DropoutMode::Sampled(&mut dropout_rng),
            )
            .unwrap();

        assert_eq!(
            eval_tape.values(eval.probabilities),
            train_tape.values(train.probabilities)
        );
    }

    #[test]
    fn dropout_masks_some_units_at_high_rate() {
        let config = ModelConfig {
            dropout_rate: 0.9,
            dense_width: 32,
            ..tiny_config()
        };
        let model = Model::build(config.clone(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let image = random_image(&mut rng, &config);
        let mut tape = Tape::new();
        let binding = model.bind(&mut tape);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(44);
        // Two passes with different mask draws should disagree somewhere.
        let a = model
            .forward(&mut tape, &binding, &image, DropoutMode::Sampled(&mut dropout_rng))
            .unwrap();
        let b = model
            .forward(&mut tape, &binding, &image, DropoutMode::Sampled(&mut dropout_rng))
            .unwrap();
        assert_ne!(tape.values(a.probabilities), tape.values(b.probabilities));
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let config = tiny_config();
        let model = Model::build(config.clone(), 7).unwrap();
        let metadata = CheckpointMetadata {
            seed: 7,
            fold: 2,
            label_mode: LabelMode::Lsr { epsilon: 0.3 },
            epoch: 17,
            test_loss: 0.421,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &path, &metadata).unwrap();
        let (loaded, loaded_meta) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_meta, metadata);
        assert_eq!(loaded.config(), &config);

        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..50 {
            let image = random_image(&mut rng, &config);
            let before = model.predict(&image).unwrap();
            let after = loaded.predict(&image).unwrap();
            assert!(
                (before.p_pain - after.p_pain).abs() <= 1e-6,
                "round-trip drifted: {} vs {}",
                before.p_pain,
                after.p_pain
            );
            assert_eq!(
                before.classify(0.5).unwrap(),
                after.classify(0.5).unwrap(),
                "decision flipped after round-trip"
            );
        }
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let model = Model::build(tiny_config(), 8).unwrap();
        let metadata = CheckpointMetadata {
            seed: 8,
            fold: 0,
            label_mode: LabelMode::Hard,
            epoch: 1,
            test_loss: 0.9,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &path, &metadata).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        match load_checkpoint(&cut) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTMAGIC0000").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn shape_mismatch_names_the_parameter() {
        let model = Model::build(tiny_config(), 9).unwrap();
        let metadata = CheckpointMetadata {
            seed: 9,
            fold: 0,
            label_mode: LabelMode::Hard,
            epoch: 0,
            test_loss: 1.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &path, &metadata).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip one dimension of the first parameter record. The record sits
        // after magic(8) + version(4) + two length-prefixed JSON blobs +
        // param count(4) + name prefix(4+name); the first dim starts 8 bytes
        // into the shape list. Corrupt the low byte of the first dim.
        let config_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let meta_off = 20 + config_len;
        let meta_len = u64::from_le_bytes(bytes[meta_off..meta_off + 8].try_into().unwrap()) as usize;
        let params_off = meta_off + 8 + meta_len + 4;
        let name_len =
            u32::from_le_bytes(bytes[params_off..params_off + 4].try_into().unwrap()) as usize;
        let dim_off = params_off + 4 + name_len + 4;
        bytes[dim_off] = bytes[dim_off].wrapping_add(1);
        let corrupt = dir.path().join("corrupt.ckpt");
        std::fs::write(&corrupt, &bytes).unwrap();
        match load_checkpoint(&corrupt) {
            Err(Error::Format { details, .. }) => {
                assert!(details.contains("wide.kernels"), "details: {details}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }
}

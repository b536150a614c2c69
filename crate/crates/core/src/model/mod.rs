//! Two-stream hierarchical CNN around the attention block.
//!
//! Each stream (positions, motion) runs
//! `attention → skeleton transformer → 3×(conv → ReLU) → flatten`;
//! the two feature vectors are concatenated and classified by three fully
//! connected layers.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};

use std::borrow::Cow;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{csta_forward, AttentionMode, AttentionOutput, AttentionParams, AttentionVars, BoundAttention};
use crate::skeleton::{FixedSample, SkeletonSequence, FRAMES, JOINTS};
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("parameter {name}: {message}")]
    Param { name: String, message: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub channels: usize,
    /// Square kernel side.
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub const fn new(channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        ConvSpec {
            channels,
            kernel,
            stride,
            padding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub frames: usize,
    pub joints: usize,
    /// Joints after the skeleton transformer.
    pub interp_joints: usize,
    pub convs: [ConvSpec; 3],
    /// Widths of the two hidden fully connected layers.
    pub fc_widths: [usize; 2],
    pub num_classes: usize,
    pub mode: AttentionMode,
    /// Translate each sequence so its first-frame spine joint is the origin
    /// before frames are selected.
    #[serde(default)]
    pub center: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            frames: FRAMES,
            joints: JOINTS,
            interp_joints: 30,
            convs: [
                ConvSpec::new(32, 3, 1, 1),
                ConvSpec::new(64, 3, 2, 1),
                ConvSpec::new(64, 3, 2, 1),
            ],
            fc_widths: [256, 128],
            num_classes: 5,
            mode: AttentionMode::Full,
            center: false,
        }
    }
}

impl ModelConfig {
    pub fn with_classes(num_classes: usize) -> Self {
        ModelConfig {
            num_classes,
            ..Default::default()
        }
    }

    /// `(channels, height, width)` after each conv layer, input first.
    pub fn conv_shapes(&self) -> Result<Vec<(usize, usize, usize)>, ModelError> {
        let mut shapes = vec![(3, self.frames, self.interp_joints)];
        for (i, c) in self.convs.iter().enumerate() {
            let (_, h, w) = *shapes.last().unwrap();
            if c.channels == 0 || c.kernel == 0 || c.stride == 0 {
                return Err(ModelError::Config(format!("conv{} has a zero size", i + 1)));
            }
            if c.kernel > h + 2 * c.padding || c.kernel > w + 2 * c.padding {
                return Err(ModelError::Config(format!(
                    "conv{} kernel {} exceeds padded input {}×{}",
                    i + 1,
                    c.kernel,
                    h + 2 * c.padding,
                    w + 2 * c.padding
                )));
            }
            let out = |d: usize| (d + 2 * c.padding - c.kernel) / c.stride + 1;
            shapes.push((c.channels, out(h), out(w)));
        }
        Ok(shapes)
    }

    /// The sequence as the model sees it, after optional centering.
    pub fn prepare<'a>(&self, seq: &'a SkeletonSequence) -> Cow<'a, SkeletonSequence> {
        if self.center {
            Cow::Owned(seq.centered())
        } else {
            Cow::Borrowed(seq)
        }
    }

    /// Flattened feature length of one stream.
    pub fn feature_len(&self) -> Result<usize, ModelError> {
        let (c, h, w) = *self.conv_shapes()?.last().unwrap();
        Ok(c * h * w)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.frames < 2 {
            return Err(ModelError::Config("need at least 2 frames for the motion stream".into()));
        }
        for (name, v) in [
            ("joints", self.joints),
            ("interp_joints", self.interp_joints),
            ("fc1 width", self.fc_widths[0]),
            ("fc2 width", self.fc_widths[1]),
            ("num_classes", self.num_classes),
        ] {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        self.conv_shapes().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `C_out × C_in × k × k`
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `d_out × d_in`
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamParams {
    pub attention: AttentionParams,
    /// `N × M` skeleton transformer.
    pub transformer: Tensor,
    pub convs: Vec<ConvParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub position: StreamParams,
    pub motion: StreamParams,
    pub fc: Vec<DenseParams>,
}

fn uniform(shape: &[usize], limit: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-limit..limit))
}

impl StreamParams {
    fn zeros(config: &ModelConfig) -> Self {
        let mut in_channels = 3;
        let convs = config
            .convs
            .iter()
            .map(|c| {
                let p = ConvParams {
                    kernels: Tensor::zeros(&[c.channels, in_channels, c.kernel, c.kernel]),
                    bias: Tensor::zeros(&[c.channels]),
                };
                in_channels = c.channels;
                p
            })
            .collect();
        StreamParams {
            attention: AttentionParams::zeros(config.frames, config.joints),
            transformer: Tensor::zeros(&[config.joints, config.interp_joints]),
            convs,
        }
    }

    fn init(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(config);
        p.attention = AttentionParams::init(config.frames, config.joints, rng);
        // identity on the first min(N, M) columns, small noise elsewhere
        let m = config.interp_joints;
        p.transformer = Tensor::from_fn(&[config.joints, m], |i| {
            let (j, k) = (i / m, i % m);
            if j == k {
                1.0
            } else if k >= config.joints {
                rng.random_range(-0.01..0.01)
            } else {
                0.0
            }
        });
        for conv in &mut p.convs {
            let s = conv.kernels.shape().to_vec();
            let fan_in = (s[1] * s[2] * s[3]) as f64;
            conv.kernels = uniform(&s, (6.0 / fan_in).sqrt(), rng);
        }
        p
    }

    fn named(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            (format!("{prefix}.attention.spatial_weight"), &self.attention.spatial_weight),
            (format!("{prefix}.attention.spatial_bias"), &self.attention.spatial_bias),
            (format!("{prefix}.attention.temporal_weight"), &self.attention.temporal_weight),
            (format!("{prefix}.attention.temporal_bias"), &self.attention.temporal_bias),
            (format!("{prefix}.transformer"), &self.transformer),
        ];
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("{prefix}.conv{}.kernels", i + 1), &c.kernels));
            out.push((format!("{prefix}.conv{}.bias", i + 1), &c.bias));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![
            &mut self.attention.spatial_weight,
            &mut self.attention.spatial_bias,
            &mut self.attention.temporal_weight,
            &mut self.attention.temporal_bias,
            &mut self.transformer,
        ];
        for c in &mut self.convs {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
        }
        out
    }

    pub fn bind<'p>(&'p self, tape: &mut Tape<'p>) -> BoundStream {
        BoundStream {
            attention: self.attention.bind(tape),
            transformer: tape.param(&self.transformer),
            convs: self
                .convs
                .iter()
                .map(|c| (tape.param(&c.kernels), tape.param(&c.bias)))
                .collect(),
        }
    }
}

impl ModelParams {
    /// All-zero parameters with the configured shapes.
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let feature = config.feature_len()?;
        let widths = [2 * feature, config.fc_widths[0], config.fc_widths[1], config.num_classes];
        let fc = widths
            .windows(2)
            .map(|w| DenseParams {
                weight: Tensor::zeros(&[w[1], w[0]]),
                bias: Tensor::zeros(&[w[1]]),
            })
            .collect();
        Ok(ModelParams {
            config: config.clone(),
            position: StreamParams::zeros(config),
            motion: StreamParams::zeros(config),
            fc,
        })
    }

    /// Random initialization: He-uniform convs and hidden layers, a narrow
    /// output layer so initial logits stay near zero, zero biases.
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> Result<Self, ModelError> {
        let mut p = Self::zeros(config)?;
        p.position = StreamParams::init(config, rng);
        p.motion = StreamParams::init(config, rng);
        let last = p.fc.len() - 1;
        for (i, layer) in p.fc.iter_mut().enumerate() {
            let s = layer.weight.shape().to_vec();
            let fan_in = s[1] as f64;
            let limit = if i == last { 0.1 / fan_in.sqrt() } else { (6.0 / fan_in).sqrt() };
            layer.weight = uniform(&s, limit, rng);
        }
        Ok(p)
    }

    /// Every parameter tensor with its stable name, in canonical order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.position.named("position");
        out.extend(self.motion.named("motion"));
        for (i, d) in self.fc.iter().enumerate() {
            out.push((format!("fc{}.weight", i + 1), &d.weight));
            out.push((format!("fc{}.bias", i + 1), &d.bias));
        }
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.position.tensors_mut();
        out.extend(self.motion.tensors_mut());
        for d in &mut self.fc {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// Builds parameters from `(name, tensor)` pairs, which must match the
    /// configured layout exactly.
    pub fn from_named(config: &ModelConfig, tensors: Vec<(String, Tensor)>) -> Result<Self, ModelError> {
        let mut p = Self::zeros(config)?;
        let expected: Vec<(String, Vec<usize>)> =
            p.named().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        if expected.len() != tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (slot, ((name, shape), (got_name, t))) in p.tensors_mut().into_iter().zip(expected.into_iter().zip(tensors)) {
            if name != got_name {
                return Err(ModelError::Param {
                    name: got_name,
                    message: format!("expected tensor {name} at this position"),
                });
            }
            if t.shape() != shape.as_slice() {
                return Err(ModelError::Param {
                    name,
                    message: format!("shape {:?} does not match configured {:?}", t.shape(), shape),
                });
            }
            if !t.is_finite() {
                return Err(ModelError::Param {
                    name,
                    message: "non-finite value".into(),
                });
            }
            *slot = t;
        }
        Ok(p)
    }

    pub fn bind<'p>(&'p self, tape: &mut Tape<'p>) -> BoundModel {
        BoundModel {
            position: self.position.bind(tape),
            motion: self.motion.bind(tape),
            fc: self
                .fc
                .iter()
                .map(|d| (tape.param(&d.weight), tape.param(&d.bias)))
                .collect(),
        }
    }

    /// Logits for one sample.
    pub fn logits(&self, sample: &FixedSample) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = model_forward(&mut tape, sample, &bound, &self.config)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Attention of both streams for one sample.
    pub fn attention(&self, sample: &FixedSample) -> Result<(AttentionOutput, AttentionOutput), ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = model_forward(&mut tape, sample, &bound, &self.config)?;
        Ok((out.position_attention.read(&tape), out.motion_attention.read(&tape)))
    }

    /// Cross-entropy loss of one sample and its gradient for every parameter
    /// tensor, in [`ModelParams::named`] order.
    pub fn loss_and_grads(&self, sample: &FixedSample) -> Result<SampleGradient, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = model_forward(&mut tape, sample, &bound, &self.config)?;
        let loss = tape.softmax_cross_entropy(out.logits, sample.label)?;
        tape.backward(loss)?;
        let mut grads = Vec::new();
        for v in bound.vars() {
            let len = tape.value(v).len();
            grads.push(tape.take_grad_data(v).unwrap_or_else(|| vec![0.0; len]));
        }
        Ok(SampleGradient {
            loss: tape.value(loss).data()[0],
            logits: tape.value(out.logits).clone(),
            grads,
        })
    }

    pub fn loss(&self, sample: &FixedSample) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = model_forward(&mut tape, sample, &bound, &self.config)?;
        let loss = tape.softmax_cross_entropy(out.logits, sample.label)?;
        Ok(tape.value(loss).data()[0])
    }
}

#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    pub logits: Tensor,
    pub grads: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BoundStream {
    pub attention: BoundAttention,
    pub transformer: Var,
    pub convs: Vec<(Var, Var)>,
}

impl BoundStream {
    fn vars(&self, out: &mut Vec<Var>) {
        out.extend(self.attention.vars());
        out.push(self.transformer);
        for &(k, b) in &self.convs {
            out.push(k);
            out.push(b);
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundModel {
    pub position: BoundStream,
    pub motion: BoundStream,
    pub fc: Vec<(Var, Var)>,
}

impl BoundModel {
    /// Parameter variables in [`ModelParams::named`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.position.vars(&mut out);
        self.motion.vars(&mut out);
        for &(w, b) in &self.fc {
            out.push(w);
            out.push(b);
        }
        out
    }
}

/// `out[t][m][c] = Σ_j x[t][j][c] · A[j][m]` for `x: T×N×3`, `A: N×M`.
pub fn skeleton_transform(tape: &mut Tape<'_>, x: Var, transform: Var) -> Result<Var, TensorError> {
    let (t, n) = match tape.shape(x) {
        [t, n, 3] => (*t, *n),
        s => {
            return Err(TensorError::Shape {
                op: "skeleton_transform",
                lhs: s.to_vec(),
                rhs: tape.shape(transform).to_vec(),
            })
        }
    };
    let coords_first = tape.permute(x, &[0, 2, 1])?; // T×3×N
    let rows = tape.reshape(coords_first, &[3 * t, n])?;
    let mixed = tape.matmul(rows, transform)?; // 3T×M
    let m = tape.shape(mixed)[1];
    let mixed = tape.reshape(mixed, &[t, 3, m])?;
    tape.permute(mixed, &[0, 2, 1])
}

pub struct StreamOutput {
    pub feature: Var,
    pub attention: AttentionVars,
}

/// Attention, skeleton transformer, conv stack and flatten for one stream.
pub fn stream_forward(
    tape: &mut Tape<'_>,
    x: Var,
    params: &BoundStream,
    config: &ModelConfig,
) -> Result<StreamOutput, TensorError> {
    let attention = csta_forward(tape, x, &params.attention, config.mode)?;
    let joints = skeleton_transform(tape, attention.applied, params.transformer)?;
    let mut h = tape.permute(joints, &[2, 0, 1])?; // 3×T×M
    for (spec, &(k, b)) in config.convs.iter().zip(&params.convs) {
        let c = tape.conv2d(h, k, (spec.stride, spec.stride), (spec.padding, spec.padding))?;
        let c = tape.channel_bias(c, b)?;
        h = tape.relu(c)?;
    }
    let len = tape.value(h).len();
    let feature = tape.reshape(h, &[len])?;
    Ok(StreamOutput { feature, attention })
}

pub struct ModelOutput {
    pub logits: Var,
    pub position_attention: AttentionVars,
    pub motion_attention: AttentionVars,
}

pub fn model_forward(
    tape: &mut Tape<'_>,
    sample: &FixedSample,
    params: &BoundModel,
    config: &ModelConfig,
) -> Result<ModelOutput, TensorError> {
    let expected = [config.frames, config.joints, 3];
    for t in [&sample.position, &sample.motion] {
        if t.shape() != expected {
            return Err(TensorError::Shape {
                op: "model_forward",
                lhs: t.shape().to_vec(),
                rhs: expected.to_vec(),
            });
        }
    }
    let pos = tape.constant(sample.position.clone());
    let mot = tape.constant(sample.motion.clone());
    let u = stream_forward(tape, pos, &params.position, config)?;
    let u_prime = stream_forward(tape, mot, &params.motion, config)?;
    let mut h = tape.concat(&[u.feature, u_prime.feature], 0)?;
    let last = params.fc.len() - 1;
    for (i, &(w, b)) in params.fc.iter().enumerate() {
        h = tape.linear(h, w, b)?;
        if i < last {
            h = tape.relu(h)?;
        }
    }
    Ok(ModelOutput {
        logits: h,
        position_attention: u.attention,
        motion_attention: u_prime.attention,
    })
}

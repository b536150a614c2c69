//! Flat `key = value` run configuration (TOML syntax). Every key is optional;
//! missing keys take the library defaults.

use serde::{Deserialize, Serialize};

use crate::attention::AttentionMode;
use crate::model::{ConvSpec, ModelConfig};
use crate::skeleton::AugmentConfig;
use crate::trainer::{OptimizerConfig, OptimizerKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frames: usize,
    pub interp_joints: usize,
    pub conv1_channels: usize,
    pub conv1_kernel: usize,
    pub conv1_stride: usize,
    pub conv1_padding: usize,
    pub conv2_channels: usize,
    pub conv2_kernel: usize,
    pub conv2_stride: usize,
    pub conv2_padding: usize,
    pub conv3_channels: usize,
    pub conv3_kernel: usize,
    pub conv3_stride: usize,
    pub conv3_padding: usize,
    pub fc1_width: usize,
    pub fc2_width: usize,
    pub mode: AttentionMode,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// `false` trains on one evenly spaced clip per sequence.
    pub augmentation: bool,
    pub aug_sample_count: usize,
    pub aug_crop_count: usize,
    pub crop_ratio_lo: f64,
    pub crop_ratio_hi: f64,
    /// Move the first-frame spine joint to the origin.
    pub center: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let a = AugmentConfig::default();
        let [c1, c2, c3] = m.convs;
        RunConfig {
            frames: m.frames,
            interp_joints: m.interp_joints,
            conv1_channels: c1.channels,
            conv1_kernel: c1.kernel,
            conv1_stride: c1.stride,
            conv1_padding: c1.padding,
            conv2_channels: c2.channels,
            conv2_kernel: c2.kernel,
            conv2_stride: c2.stride,
            conv2_padding: c2.padding,
            conv3_channels: c3.channels,
            conv3_kernel: c3.kernel,
            conv3_stride: c3.stride,
            conv3_padding: c3.padding,
            fc1_width: m.fc_widths[0],
            fc2_width: m.fc_widths[1],
            mode: m.mode,
            optimizer: t.optimizer.kind,
            learning_rate: t.optimizer.learning_rate,
            momentum: t.optimizer.momentum,
            beta1: t.optimizer.beta1,
            beta2: t.optimizer.beta2,
            weight_decay: t.optimizer.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            augmentation: true,
            aug_sample_count: a.sample_count,
            aug_crop_count: a.crop_count,
            crop_ratio_lo: a.crop_ratio.0,
            crop_ratio_hi: a.crop_ratio.1,
            center: m.center,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn model_config(&self, num_classes: usize) -> ModelConfig {
        ModelConfig {
            frames: self.frames,
            joints: crate::skeleton::JOINTS,
            interp_joints: self.interp_joints,
            convs: [
                ConvSpec::new(self.conv1_channels, self.conv1_kernel, self.conv1_stride, self.conv1_padding),
                ConvSpec::new(self.conv2_channels, self.conv2_kernel, self.conv2_stride, self.conv2_padding),
                ConvSpec::new(self.conv3_channels, self.conv3_kernel, self.conv3_stride, self.conv3_padding),
            ],
            fc_widths: [self.fc1_width, self.fc2_width],
            num_classes,
            mode: self.mode,
            center: self.center,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            optimizer: OptimizerConfig {
                kind: self.optimizer,
                learning_rate: self.learning_rate,
                momentum: self.momentum,
                beta1: self.beta1,
                beta2: self.beta2,
                weight_decay: self.weight_decay,
            },
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            augmentation: self.augmentation.then(|| AugmentConfig {
                sample_count: self.aug_sample_count,
                crop_count: self.aug_crop_count,
                crop_ratio: (self.crop_ratio_lo, self.crop_ratio_hi),
                frames: self.frames,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_library_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.model_config(5), ModelConfig::default());
        assert_eq!(c.train_config(0), TrainConfig::default());
    }

    #[test]
    fn keys_override() {
        let c = RunConfig::parse("epochs = 3\nmode = \"without_ST\"\noptimizer = \"sgd_momentum\"\naugmentation = false\n")
            .unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.model_config(2).mode, AttentionMode::WithoutST);
        let t = c.train_config(9);
        assert_eq!(t.optimizer.kind, OptimizerKind::SgdMomentum);
        assert_eq!(t.augmentation, None);
        assert_eq!(t.seed, 9);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::parse("epochz = 3").unwrap_err();
        assert!(err.to_string().contains("epochz"));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.learning_rate = 0.0123;
        c.crop_ratio_lo = 0.6;
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }
}

//! Generated three-class dataset where each class moves a known set of
//! joints: left-arm oscillation, right-leg oscillation, whole-body
//! translation. Used to check that training converges and that attention
//! concentrates on the moving joints.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{stream_rng, Dataset, Frame, Protocol, SkeletonSequence, Split, JOINTS};

/// Rest pose in meters, NTU joint order, standing ~3 m from the sensor.
pub const REST_POSE: Frame = [
    [0.0, 0.0, 3.0],     // spine base
    [0.0, 0.30, 3.0],    // spine mid
    [0.0, 0.60, 3.0],    // neck
    [0.0, 0.75, 3.0],    // head
    [-0.18, 0.55, 3.0],  // left shoulder
    [-0.25, 0.30, 3.0],  // left elbow
    [-0.28, 0.08, 3.0],  // left wrist
    [-0.29, 0.00, 3.0],  // left hand
    [0.18, 0.55, 3.0],   // right shoulder
    [0.25, 0.30, 3.0],   // right elbow
    [0.28, 0.08, 3.0],   // right wrist
    [0.29, 0.00, 3.0],   // right hand
    [-0.10, -0.02, 3.0], // left hip
    [-0.11, -0.45, 3.0], // left knee
    [-0.12, -0.85, 3.0], // left ankle
    [-0.12, -0.90, 2.92], // left foot
    [0.10, -0.02, 3.0],  // right hip
    [0.11, -0.45, 3.0],  // right knee
    [0.12, -0.85, 3.0],  // right ankle
    [0.12, -0.90, 2.92], // right foot
    [0.0, 0.50, 3.0],    // spine shoulder
    [-0.30, -0.06, 3.0], // left hand tip
    [-0.26, -0.02, 3.0], // left thumb
    [0.30, -0.06, 3.0],  // right hand tip
    [0.26, -0.02, 3.0],  // right thumb
];

/// Joints displaced in class 0, with their swing scale.
pub const LEFT_ARM: [(usize, f64); 5] = [(5, 0.5), (6, 0.8), (7, 1.0), (21, 1.0), (22, 1.0)];
/// Joints displaced in class 1, with their swing scale.
pub const RIGHT_LEG: [(usize, f64); 3] = [(17, 0.5), (18, 0.9), (19, 1.0)];

pub fn left_arm_joints() -> Vec<usize> {
    LEFT_ARM.iter().map(|&(j, _)| j).collect()
}

pub const CLASS_NAMES: [&str; 3] = ["left_arm_wave", "right_leg_swing", "body_translation"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub per_class: usize,
    /// Samples per class whose subject id lands in the training split.
    pub train_per_class: usize,
    pub frames: usize,
    /// Standard deviation of additive coordinate noise, meters.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            per_class: 40,
            train_per_class: 30,
            frames: 40,
            noise: 0.01,
        }
    }
}

/// Sample `k` of every class gets subject id `k`; the cross-subject split
/// trains on subjects `0..train_per_class`.
pub fn key_joint_dataset(config: &SyntheticConfig, seed: u64) -> Dataset {
    let noise = Normal::new(0.0, config.noise).expect("noise standard deviation");
    let mut samples = Vec::with_capacity(3 * config.per_class);
    for class in 0..3 {
        for k in 0..config.per_class {
            let mut rng = stream_rng(seed, (class * config.per_class + k) as u64);
            let frames = generate(class, config.frames, &mut rng, &noise);
            let mut seq = SkeletonSequence::new(frames, class);
            seq.subject_id = k as u32;
            seq.source = format!("synthetic:{}:{k}", CLASS_NAMES[class]);
            samples.push(seq);
        }
    }
    Dataset {
        class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        samples,
        split: Some(Split {
            protocol: Protocol::CrossSubject,
            train_ids: (0..config.train_per_class as u32).collect(),
        }),
    }
}

fn generate(class: usize, len: usize, rng: &mut impl Rng, noise: &Normal<f64>) -> Vec<Frame> {
    let offset = [rng.random_range(-0.2..0.2), 0.0, rng.random_range(-0.2..0.2)];
    let period = rng.random_range(10.0..20.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let heading = rng.random_range(0.0..2.0 * PI);
    let (amplitude, speed) = match class {
        0 => (rng.random_range(0.15..0.30), 0.0),
        1 => (rng.random_range(0.10..0.25), 0.0),
        _ => (0.0, rng.random_range(0.01..0.02)),
    };
    let mut frames = Vec::with_capacity(len);
    for t in 0..len {
        let angle = 2.0 * PI * t as f64 / period + phase;
        let mut frame = REST_POSE;
        for joint in frame.iter_mut() {
            for c in 0..3 {
                joint[c] += offset[c];
            }
        }
        match class {
            0 => {
                for &(j, w) in &LEFT_ARM {
                    frame[j][0] += w * amplitude * 0.5 * angle.cos();
                    frame[j][1] += w * amplitude * angle.sin();
                }
            }
            1 => {
                for &(j, w) in &RIGHT_LEG {
                    frame[j][1] += w * amplitude * 0.4 * angle.sin().max(0.0);
                    frame[j][2] -= w * amplitude * angle.sin();
                }
            }
            _ => {
                let d = speed * t as f64;
                for joint in frame.iter_mut() {
                    joint[0] += d * heading.cos();
                    joint[2] += d * heading.sin();
                }
            }
        }
        for joint in frame.iter_mut().take(JOINTS) {
            for c in joint.iter_mut() {
                *c += noise.sample(rng);
            }
        }
        frames.push(frame);
    }
    frames
}

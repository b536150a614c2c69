//! Skeleton sequences: ingestion, validation, the motion stream and
//! temporal augmentation.

mod augment;
mod json;
mod ntu;
pub mod synthetic;

pub use augment::{
    augment, crop_window, even_indices, stream_rng, temporal_random_crop, temporal_random_sample,
    AugmentConfig, SeedRng,
};
pub use json::{parse_canonical_json, write_canonical_json};
pub use ntu::{parse_ntu_file_name, parse_ntu_skeleton, NtuFileName};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

/// Joints per body in the NTU / Kinect v2 topology.
pub const JOINTS: usize = 25;
/// Default number of frames fed to the model.
pub const FRAMES: usize = 30;
/// Joint used as origin by [`SkeletonSequence::centered`] (middle of the spine).
pub const SPINE_JOINT: usize = 1;

/// One frame of one body: `JOINTS` joints × (x, y, z) in meters.
pub type Frame = [[f64; 3]; JOINTS];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no body is present in any frame")]
    EmptySample,
    #[error("invalid dataset at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A raw, variable-length labeled recording of a single body.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub frames: Vec<Frame>,
    pub label: usize,
    pub subject_id: u32,
    pub view_id: u32,
    pub source: String,
}

impl SkeletonSequence {
    pub fn new(frames: Vec<Frame>, label: usize) -> Self {
        SkeletonSequence {
            frames,
            label,
            subject_id: 0,
            view_id: 0,
            source: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Copy translated so that the first frame's spine joint sits at the origin.
    pub fn centered(&self) -> Self {
        let mut out = self.clone();
        if let Some(first) = self.frames.first() {
            let origin = first[SPINE_JOINT];
            for frame in &mut out.frames {
                for joint in frame.iter_mut() {
                    for c in 0..3 {
                        joint[c] -= origin[c];
                    }
                }
            }
        }
        out
    }

    /// Position tensor `len(indices) × JOINTS × 3` built from the given frames.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor, DataError> {
        let mut data = Vec::with_capacity(indices.len() * JOINTS * 3);
        for &i in indices {
            let frame = self.frames.get(i).ok_or_else(|| {
                DataError::Contract(format!("frame index {i} out of range ({} frames)", self.len()))
            })?;
            data.extend(frame.iter().flatten());
        }
        Ok(Tensor::new(vec![indices.len(), JOINTS, 3], data)?)
    }
}

/// A model-ready sample: position and motion streams of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSample {
    pub position: Tensor,
    pub motion: Tensor,
    pub label: usize,
}

impl FixedSample {
    pub fn from_position(position: Tensor, label: usize) -> Result<Self, DataError> {
        let motion = motion_stream(&position)?;
        Ok(FixedSample {
            position,
            motion,
            label,
        })
    }

    pub fn from_indices(seq: &SkeletonSequence, indices: &[usize]) -> Result<Self, DataError> {
        Self::from_position(seq.gather(indices)?, seq.label)
    }

    /// Deterministic evenly spaced selection of `frames` frames over the whole
    /// sequence; used for evaluation.
    pub fn uniform(seq: &SkeletonSequence, frames: usize) -> Result<Self, DataError> {
        if seq.is_empty() {
            return Err(DataError::EmptySample);
        }
        Self::from_indices(seq, &even_indices(seq.len(), frames))
    }

    pub fn frames(&self) -> usize {
        self.position.shape()[0]
    }
}

/// Frame-to-frame displacement `x[t+1] − x[t]` of a `T×N×3` tensor. The last
/// frame has no successor and is zero so both streams share one shape.
pub fn motion_stream(position: &Tensor) -> Result<Tensor, DataError> {
    let shape = position.shape();
    if shape.len() != 3 || shape[2] != 3 {
        return Err(DataError::Contract(format!(
            "motion stream needs a T×N×3 tensor, got {shape:?}"
        )));
    }
    if shape[0] < 2 {
        return Err(DataError::Contract(format!(
            "motion stream needs at least 2 frames, got {}",
            shape[0]
        )));
    }
    let stride = shape[1] * 3;
    let p = position.data();
    let mut out = vec![0.0; p.len()];
    for i in 0..p.len() - stride {
        out[i] = p[i + stride] - p[i];
    }
    Ok(Tensor::new(shape.to_vec(), out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    CrossSubject,
    CrossView,
}

/// Train/test assignment: a sample is in the training split when its subject
/// (cross-subject) or view (cross-view) id is listed in `train_ids`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub protocol: Protocol,
    pub train_ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub samples: Vec<SkeletonSequence>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.frames.is_empty() {
                return Err(DataError::Validation {
                    path: format!("samples[{i}].frames"),
                    message: "sequence has no frames".into(),
                });
            }
            if s.label >= self.num_classes() {
                return Err(DataError::Validation {
                    path: format!("samples[{i}].label"),
                    message: format!(
                        "label {} is not below the class count {}",
                        s.label,
                        self.num_classes()
                    ),
                });
            }
            for (t, frame) in s.frames.iter().enumerate() {
                if frame.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(DataError::Validation {
                        path: format!("samples[{i}].frames[{t}]"),
                        message: "non-finite coordinate".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Sample indices of the training and test splits. Without a split
    /// definition every sample is in the training split.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        let Some(split) = &self.split else {
            return ((0..self.samples.len()).collect(), Vec::new());
        };
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, s) in self.samples.iter().enumerate() {
            let id = match split.protocol {
                Protocol::CrossSubject => s.subject_id,
                Protocol::CrossView => s.view_id,
            };
            if split.train_ids.contains(&id) {
                train.push(i);
            } else {
                test.push(i);
            }
        }
        (train, test)
    }

    pub fn split_indices(&self, which: SplitName) -> Vec<usize> {
        let (train, test) = self.partition();
        match which {
            SplitName::Train => train,
            SplitName::Test => test,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<SkeletonSequence> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(frames: usize) -> Tensor {
        Tensor::from_fn(&[frames, JOINTS, 3], |i| (i / (JOINTS * 3)) as f64)
    }

    #[test]
    fn motion_of_constant_is_zero() {
        let p = Tensor::full(&[5, JOINTS, 3], 0.7);
        let m = motion_stream(&p).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
        assert_eq!(m.shape(), p.shape());
    }

    #[test]
    fn motion_of_unit_ramp() {
        let m = motion_stream(&ramp(4)).unwrap();
        for t in 0..4 {
            for j in 0..JOINTS {
                for c in 0..3 {
                    let expected = if t < 3 { 1.0 } else { 0.0 };
                    assert_eq!(m.get(&[t, j, c]), expected);
                }
            }
        }
    }

    #[test]
    fn motion_needs_two_frames() {
        assert!(matches!(
            motion_stream(&Tensor::zeros(&[1, JOINTS, 3])),
            Err(DataError::Contract(_))
        ));
    }

    #[test]
    fn centered_moves_spine_to_origin() {
        let mut frame = [[0.0; 3]; JOINTS];
        frame[SPINE_JOINT] = [1.0, 2.0, 3.0];
        frame[0] = [1.5, 2.0, 3.0];
        let seq = SkeletonSequence::new(vec![frame, frame], 0).centered();
        assert_eq!(seq.frames[1][SPINE_JOINT], [0.0, 0.0, 0.0]);
        assert_eq!(seq.frames[0][0], [0.5, 0.0, 0.0]);
    }

    #[test]
    fn partition_covers_every_sample_once() {
        let mut ds = Dataset {
            class_names: vec!["a".into()],
            ..Default::default()
        };
        for k in 0..10u32 {
            let mut s = SkeletonSequence::new(vec![[[0.0; 3]; JOINTS]], 0);
            s.subject_id = k;
            s.view_id = k % 3;
            ds.samples.push(s);
        }
        for protocol in [Protocol::CrossSubject, Protocol::CrossView] {
            ds.split = Some(Split {
                protocol,
                train_ids: vec![0, 1, 4],
            });
            let (train, test) = ds.partition();
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort();
            assert_eq!(all, (0..10).collect::<Vec<_>>());
        }
        ds.split = None;
        assert_eq!(ds.partition().0.len(), 10);
    }

    #[test]
    fn validate_rejects_bad_label() {
        let ds = Dataset {
            class_names: vec!["a".into()],
            samples: vec![SkeletonSequence::new(vec![[[0.0; 3]; JOINTS]], 1)],
            split: None,
        };
        match ds.validate() {
            Err(DataError::Validation { path, .. }) => assert_eq!(path, "samples[0].label"),
            other => panic!("{other:?}"),
        }
    }
}

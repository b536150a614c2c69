use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, FixedSample, SkeletonSequence, FRAMES};

/// The generator behind every random draw in this crate: ChaCha with 8
/// rounds, whose output is specified independently of the platform.
pub type SeedRng = ChaCha8Rng;

/// Generator for an independent stream keyed by `(seed, stream)`, e.g. one
/// stream per sample index.
pub fn stream_rng(seed: u64, stream: u64) -> SeedRng {
    let mut rng = SeedRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` evenly spaced indices over `0..len`: `round(k·(len−1)/(count−1))`.
/// Non-decreasing; repeats indices when `len < count`.
pub fn even_indices(len: usize, count: usize) -> Vec<usize> {
    if count == 1 || len == 1 {
        return vec![0; count];
    }
    let step = (len - 1) as f64 / (count - 1) as f64;
    (0..count).map(|k| (k as f64 * step).round() as usize).collect()
}

/// Picks `frames` frame indices at random, sorted ascending. Without
/// replacement when the sequence is long enough, with replacement otherwise.
pub fn temporal_random_sample(
    seq: &SkeletonSequence,
    frames: usize,
    rng: &mut impl Rng,
) -> Result<FixedSample, DataError> {
    if seq.is_empty() {
        return Err(DataError::EmptySample);
    }
    let len = seq.len();
    let mut indices = if len >= frames {
        rand::seq::index::sample(rng, len, frames).into_vec()
    } else {
        (0..frames).map(|_| rng.random_range(0..len)).collect()
    };
    indices.sort_unstable();
    FixedSample::from_indices(seq, &indices)
}

/// Draws a crop `(start, length)` of a `len`-frame sequence whose length is
/// `round(r·len)` for `r` uniform in `[lo, hi]`.
pub fn crop_window(
    len: usize,
    ratio: (f64, f64),
    rng: &mut impl Rng,
) -> Result<(usize, usize), DataError> {
    let (lo, hi) = ratio;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(DataError::Contract(format!(
            "crop ratio range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"
        )));
    }
    if len == 0 {
        return Err(DataError::EmptySample);
    }
    let r = rng.random_range(lo..=hi);
    let crop = ((r * len as f64).round() as usize).clamp(1, len);
    let start = rng.random_range(0..=len - crop);
    Ok((start, crop))
}

/// Random crop followed by evenly spaced selection of `frames` frames
/// inside the crop.
pub fn temporal_random_crop(
    seq: &SkeletonSequence,
    ratio: (f64, f64),
    frames: usize,
    rng: &mut impl Rng,
) -> Result<FixedSample, DataError> {
    let (start, crop) = crop_window(seq.len(), ratio, rng)?;
    let indices: Vec<usize> = even_indices(crop, frames)
        .into_iter()
        .map(|i| start + i)
        .collect();
    FixedSample::from_indices(seq, &indices)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Random-sampling draws per input sequence.
    pub sample_count: usize,
    /// Random-crop draws per input sequence.
    pub crop_count: usize,
    pub crop_ratio: (f64, f64),
    pub frames: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            sample_count: 4,
            crop_count: 4,
            crop_ratio: (0.5, 1.0),
            frames: FRAMES,
        }
    }
}

impl AugmentConfig {
    pub fn copies(&self) -> usize {
        self.sample_count + self.crop_count
    }
}

/// Expands every sequence into `sample_count` random samples followed by
/// `crop_count` random crops. Sequence `i` draws from `stream_rng(seed, i)`,
/// so the output does not depend on thread scheduling.
pub fn augment(
    sequences: &[SkeletonSequence],
    config: &AugmentConfig,
    seed: u64,
) -> Result<Vec<FixedSample>, DataError> {
    let per_sequence: Vec<Result<Vec<FixedSample>, DataError>> = sequences
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let mut rng = stream_rng(seed, i as u64);
            let mut out = Vec::with_capacity(config.copies());
            for _ in 0..config.sample_count {
                out.push(temporal_random_sample(seq, config.frames, &mut rng)?);
            }
            for _ in 0..config.crop_count {
                out.push(temporal_random_crop(seq, config.crop_ratio, config.frames, &mut rng)?);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(sequences.len() * config.copies());
    for chunk in per_sequence {
        all.extend(chunk?);
    }
    Ok(all)
}

//! Temporal augmentation: random sampling and random cropping expand every
//! sequence into eight fixed-length clips.
//!
//! cargo run --release --example augmentation

use csta::skeleton::synthetic::{key_joint_dataset, SyntheticConfig};
use csta::skeleton::{augment, crop_window, stream_rng, AugmentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = key_joint_dataset(&SyntheticConfig::default(), 7);
    let config = AugmentConfig::default();
    let sequences = &dataset.samples[..3];
    let clips = augment(sequences, &config, 42)?;
    println!(
        "{} sequences × {} copies = {} clips of shape {:?}",
        sequences.len(),
        config.copies(),
        clips.len(),
        clips[0].position.shape()
    );

    let mut rng = stream_rng(42, 0);
    let len = dataset.samples[0].len();
    for _ in 0..5 {
        let (start, crop) = crop_window(len, config.crop_ratio, &mut rng)?;
        println!(
            "crop frames {start}..{} of {len} (ratio {:.2})",
            start + crop,
            crop as f64 / len as f64
        );
    }
    Ok(())
}

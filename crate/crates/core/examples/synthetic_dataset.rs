//! Writes the three-class key-joint dataset as canonical JSON.
//!
//! cargo run --release --example synthetic_dataset -- data/synthetic.json [seed]

use std::path::PathBuf;

use csta::skeleton::synthetic::{key_joint_dataset, SyntheticConfig};
use csta::skeleton::write_canonical_json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic.json".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let dataset = key_joint_dataset(&SyntheticConfig::default(), seed);
    let (train, test) = dataset.partition();
    std::fs::write(&out, write_canonical_json(&dataset)?)?;
    println!(
        "wrote {} ({} train, {} test, classes {:?})",
        out.display(),
        train.len(),
        test.len(),
        dataset.class_names
    );
    Ok(())
}

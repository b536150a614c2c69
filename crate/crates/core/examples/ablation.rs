//! Trains one model per attention mode and prints the ablation table.
//!
//! cargo run --release --example ablation -- [epochs]

use csta::model::ModelConfig;
use csta::report::{ablation_csv, AblationRecord};
use csta::skeleton::synthetic::{key_joint_dataset, SyntheticConfig};
use csta::trainer::{ablation_suite_with, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let dataset = key_joint_dataset(&SyntheticConfig::default(), 7);
    let model = ModelConfig::with_classes(dataset.num_classes());
    let config = TrainConfig {
        epochs,
        seed: 7,
        ..Default::default()
    };
    let rows = ablation_suite_with(&dataset, &model, &config, |_, row| {
        eprintln!("finished {}", row.mode);
    });
    let records: Vec<AblationRecord> = rows.iter().map(AblationRecord::from).collect();
    print!("{}", ablation_csv(&records)?);
    Ok(())
}

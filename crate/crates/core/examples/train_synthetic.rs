//! Trains the two-stream model on the generated three-class dataset and
//! reports held-out accuracy.
//!
//! cargo run --release --example train_synthetic -- [epochs] [seed]

use csta::model::ModelConfig;
use csta::skeleton::synthetic::{key_joint_dataset, SyntheticConfig};
use csta::skeleton::SplitName;
use csta::trainer::{evaluate, train_with_progress, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let dataset = key_joint_dataset(&SyntheticConfig::default(), seed);
    let model = ModelConfig::with_classes(dataset.num_classes());
    let config = TrainConfig {
        epochs,
        seed,
        ..Default::default()
    };
    let outcome = train_with_progress(&dataset, &model, &config, |s| {
        println!("epoch {:>3}  loss {:.5}  train acc {:.3}", s.epoch, s.loss, s.accuracy);
    })?;
    for split in [SplitName::Train, SplitName::Test] {
        let report = evaluate(&dataset, split, &outcome.params)?;
        println!("{split:?} accuracy {:.3}  confusion {:?}", report.accuracy, report.confusion);
    }
    Ok(())
}

//! Trains briefly, then exports one arm-wave sample's attention as CSV, an SVG
//! heatmap and a ranked joint list.
//!
//! cargo run --release --example visualize_attention -- [out_dir]

use std::fs;
use std::path::PathBuf;

use csta::model::ModelConfig;
use csta::report::{attention_csv, heatmap_svg, joint_weights_json, ranked_joints};
use csta::skeleton::synthetic::{key_joint_dataset, left_arm_joints, SyntheticConfig};
use csta::skeleton::{FixedSample, SplitName};
use csta::trainer::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "attention_out".into()));
    fs::create_dir_all(&out)?;

    let dataset = key_joint_dataset(&SyntheticConfig::default(), 7);
    let model = ModelConfig::with_classes(dataset.num_classes());
    let config = TrainConfig {
        epochs: 2,
        seed: 7,
        ..Default::default()
    };
    let params = train(&dataset, &model, &config)?.params;

    let test = dataset.split_indices(SplitName::Test);
    let index = test.into_iter().find(|&i| dataset.samples[i].label == 0).expect("class 0 test sample");
    let sample = FixedSample::uniform(&dataset.samples[index], model.frames)?;
    let (position, _motion) = params.attention(&sample)?;

    let (frames, joints) = (position.t_att.len(), position.s_att.len());
    fs::write(out.join("attention.csv"), attention_csv(&position)?)?;
    fs::write(out.join("attention.svg"), heatmap_svg(position.map.data(), frames, joints)?)?;
    fs::write(out.join("joint_weights.json"), joint_weights_json(position.s_att.data())?)?;

    let arm = left_arm_joints();
    println!("sample {index}: top joints (arm joints marked *)");
    for jw in ranked_joints(position.s_att.data()).iter().take(8) {
        let mark = if arm.contains(&jw.joint) { "*" } else { " " };
        println!("  {mark} joint {:>2}  {:.4}", jw.joint, jw.s_weight);
    }
    println!("wrote {}", out.display());
    Ok(())
}

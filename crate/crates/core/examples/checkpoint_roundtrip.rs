//! Saves freshly initialized parameters and reloads them bit-identically.
//!
//! cargo run --release --example checkpoint_roundtrip

use csta::model::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use csta::skeleton::stream_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ModelConfig::default();
    let params = ModelParams::init(&config, &mut stream_rng(1, 0))?;
    println!("{} parameters in {} tensors", params.num_parameters(), params.named().len());
    for (name, t) in params.named().iter().take(6) {
        println!("  {name:<36} {:?}", t.shape());
    }

    let path = std::env::temp_dir().join("csta_example.ckpt");
    save_checkpoint(&params, &path)?;
    let back = load_checkpoint(&path)?;
    println!(
        "{} bytes on disk, reload identical: {}",
        std::fs::metadata(&path)?.len(),
        back == params
    );
    std::fs::remove_file(&path)?;
    Ok(())
}

//! Spatial and temporal attention on a random clip, the coupled map, and the
//! four ablation modes.
//!
//! cargo run --release --example attention_map

use csta::attention::{AttentionMode, AttentionParams};
use csta::skeleton::stream_rng;
use csta::tensor::Tensor;
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (frames, joints) = (6, 5);
    let mut rng = stream_rng(11, 0);
    let params = AttentionParams::init(frames, joints, &mut rng);
    let x = Tensor::from_fn(&[frames, joints, 3], |_| rng.random_range(-1.0..1.0));

    for mode in AttentionMode::ALL {
        let out = params.forward(&x, mode)?;
        println!("{mode}");
        println!("  s_att {:.3?}", out.s_att.data());
        println!("  t_att {:.3?}", out.t_att.data());
        let changed = out.applied.data().iter().zip(x.data()).filter(|(a, b)| a != b).count();
        println!("  {changed} of {} input values rescaled", x.len());
    }

    // every 2×2 minor of a rank-1 map vanishes
    let map = params.forward(&x, AttentionMode::Full)?.map;
    let m = |t: usize, j: usize| map.get(&[t, j]);
    let minor = m(0, 0) * m(3, 4) - m(0, 4) * m(3, 0);
    println!("coupled map minor (0,3)x(0,4): {minor:.2e}");
    Ok(())
}

#![allow(dead_code)]

use csta::model::{ModelConfig, ModelParams};
use csta::skeleton::{stream_rng, FixedSample, JOINTS};
use csta::tensor::{relative_error, Tensor};
use rand::Rng;

/// Random `frames×25×3` clips with coordinates in [-1, 1) and random labels.
pub fn random_samples(count: usize, frames: usize, classes: usize, seed: u64) -> Vec<FixedSample> {
    let mut rng = stream_rng(seed, 0);
    (0..count)
        .map(|_| {
            let pos = Tensor::from_fn(&[frames, JOINTS, 3], |_| rng.random_range(-1.0..1.0));
            FixedSample::from_position(pos, rng.random_range(0..classes)).unwrap()
        })
        .collect()
}

pub fn batch_loss(params: &ModelParams, samples: &[FixedSample]) -> f64 {
    samples.iter().map(|s| params.loss(s).unwrap()).sum::<f64>() / samples.len() as f64
}

pub fn batch_grads(params: &ModelParams, samples: &[FixedSample]) -> Vec<Vec<f64>> {
    let mut total: Option<Vec<Vec<f64>>> = None;
    for s in samples {
        let g = params.loss_and_grads(s).unwrap().grads;
        match &mut total {
            None => total = Some(g),
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&g) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
            }
        }
    }
    let mut total = total.unwrap();
    for v in total.iter_mut().flatten() {
        *v /= samples.len() as f64;
    }
    total
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub size: usize,
    pub max_rel_err: f64,
}

/// Central differences of the mean batch loss for the coordinates chosen by
/// `pick(tensor index, analytic gradient)`, compared with the tape gradient.
pub fn check_model_gradients(
    params: &ModelParams,
    samples: &[FixedSample],
    eps: f64,
    mut pick: impl FnMut(usize, &[f64]) -> Vec<usize>,
) -> Vec<TensorCheck> {
    let analytic = batch_grads(params, samples);
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    let mut probe = params.clone();
    let mut out = Vec::new();
    for (ti, name) in names.iter().enumerate() {
        let coords = pick(ti, &analytic[ti]);
        let mut max_rel_err: f64 = 0.0;
        for &ci in &coords {
            let x = probe.tensors_mut()[ti].data()[ci];
            probe.tensors_mut()[ti].data_mut()[ci] = x + eps;
            let up = batch_loss(&probe, samples);
            probe.tensors_mut()[ti].data_mut()[ci] = x - eps;
            let down = batch_loss(&probe, samples);
            probe.tensors_mut()[ti].data_mut()[ci] = x;
            let numeric = (up - down) / (2.0 * eps);
            max_rel_err = max_rel_err.max(relative_error(analytic[ti][ci], numeric));
        }
        out.push(TensorCheck {
            name: name.clone(),
            checked: coords.len(),
            size: analytic[ti].len(),
            max_rel_err,
        });
    }
    out
}

/// Every coordinate of tensors up to `full_below` entries; otherwise the
/// largest-magnitude analytic entry plus `sampled` seeded random ones.
pub fn coordinate_picker(full_below: usize, sampled: usize, seed: u64) -> impl FnMut(usize, &[f64]) -> Vec<usize> {
    move |ti, grad| {
        if grad.len() <= full_below {
            return (0..grad.len()).collect();
        }
        let mut rng = stream_rng(seed, ti as u64);
        let largest = (0..grad.len())
            .max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()))
            .unwrap();
        let mut coords = vec![largest];
        coords.extend(rand::seq::index::sample(&mut rng, grad.len(), sampled.min(grad.len())).into_iter());
        coords.sort_unstable();
        coords.dedup();
        coords
    }
}

pub fn small_config(classes: usize) -> ModelConfig {
    let mut c = ModelConfig::with_classes(classes);
    c.frames = 6;
    c.interp_joints = 7;
    c.convs[0].channels = 3;
    c.convs[1].channels = 4;
    c.convs[2].channels = 4;
    c.fc_widths = [10, 8];
    c
}

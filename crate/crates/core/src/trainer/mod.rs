//! Mini-batch training, evaluation and the attention ablation harness.

mod ablation;
mod eval;
mod optim;

pub use ablation::{ablation_suite, ablation_suite_with, AblationOutcome, AblationRow, AblationSummary};
pub use eval::{argmax, evaluate, evaluate_samples, EvalReport};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind, ADAM_EPSILON};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelConfig, ModelError, ModelParams, SampleGradient};
use crate::skeleton::{augment, stream_rng, AugmentConfig, DataError, Dataset, FixedSample, SplitName};

/// RNG stream for parameter initialization. Augmentation uses streams
/// `0..n`, one per training sequence.
pub const INIT_STREAM: u64 = 1 << 63;
/// RNG stream for the per-epoch shuffle.
pub const SHUFFLE_STREAM: u64 = (1 << 63) + 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, step {step}: {reason}")]
    Diverged { epoch: usize, step: usize, reason: String },
    #[error("non-finite gradient for parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// `None` trains on one evenly spaced clip per sequence.
    pub augmentation: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerConfig::default(),
            batch_size: 16,
            epochs: 200,
            seed: 0,
            augmentation: Some(AugmentConfig::default()),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let o = &self.optimizer;
        if !(o.learning_rate.is_finite() && o.learning_rate >= 0.0) {
            return Err(TrainError::Config(format!("learning rate {} must be finite and ≥ 0", o.learning_rate)));
        }
        if !(o.weight_decay.is_finite() && o.weight_decay >= 0.0) {
            return Err(TrainError::Config(format!("weight decay {} must be finite and ≥ 0", o.weight_decay)));
        }
        for (name, v) in [("momentum", o.momentum), ("beta1", o.beta1), ("beta2", o.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(TrainError::Config(format!("{name} {v} must lie in [0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be ≥ 1".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's samples, before each step's update.
    pub loss: f64,
    /// Training accuracy over the same forward passes.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
}

/// Builds the training samples for a dataset's train split.
pub fn training_samples(
    dataset: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<Vec<FixedSample>, TrainError> {
    let sequences: Vec<_> = dataset
        .subset(&dataset.split_indices(SplitName::Train))
        .iter()
        .map(|s| model.prepare(s).into_owned())
        .collect();
    if sequences.is_empty() {
        return Err(TrainError::Data(DataError::Contract("training split is empty".into())));
    }
    match &config.augmentation {
        Some(aug) => {
            if aug.frames != model.frames {
                return Err(TrainError::Config(format!(
                    "augmentation produces {} frames but the model expects {}",
                    aug.frames, model.frames
                )));
            }
            Ok(augment(&sequences, aug, config.seed)?)
        }
        None => sequences
            .iter()
            .map(|s| FixedSample::uniform(s, model.frames))
            .collect::<Result<_, _>>()
            .map_err(Into::into),
    }
}

fn check_compatible(dataset: &Dataset, model: &ModelConfig) -> Result<(), TrainError> {
    dataset.validate()?;
    model.validate()?;
    if dataset.num_classes() != model.num_classes {
        return Err(TrainError::Config(format!(
            "dataset has {} classes but the model has {}",
            dataset.num_classes(),
            model.num_classes
        )));
    }
    Ok(())
}

pub fn train(dataset: &Dataset, model: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with_progress(dataset, model, config, |_| {})
}

/// [`train`], calling `on_epoch` after every epoch.
pub fn train_with_progress(
    dataset: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    check_compatible(dataset, model)?;
    let samples = training_samples(dataset, model, config)?;
    let mut params = ModelParams::init(model, &mut stream_rng(config.seed, INIT_STREAM))?;
    let sizes: Vec<usize> = params.named().iter().map(|(_, t)| t.len()).collect();
    let mut optimizer = Optimizer::new(config.optimizer.clone(), &sizes);
    let mut shuffle = stream_rng(config.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            step += 1;
            let diverged = |reason: String| TrainError::Diverged { epoch, step, reason };
            let results: Vec<Result<SampleGradient, ModelError>> =
                batch.par_iter().map(|&i| params.loss_and_grads(&samples[i])).collect();
            let mut total: Option<Vec<Vec<f64>>> = None;
            let mut batch_loss = 0.0;
            for (r, &i) in results.into_iter().zip(batch) {
                let g = r.map_err(|e| match e {
                    ModelError::Tensor(t) => diverged(t.to_string()),
                    other => TrainError::Model(other),
                })?;
                batch_loss += g.loss;
                if argmax(g.logits.data()) == samples[i].label {
                    correct += 1;
                }
                match &mut total {
                    None => total = Some(g.grads),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g.grads) {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(diverged(format!("batch loss is {batch_loss}")));
            }
            loss_sum += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let mut grads = total.expect("batches are non-empty");
            for g in grads.iter_mut().flat_map(|g| g.iter_mut()) {
                *g *= scale;
            }
            optimizer.step(params.tensors_mut(), &grads).map_err(|e| match e {
                TrainError::NonFiniteGradient { tensor } => {
                    diverged(format!("non-finite gradient in parameter tensor {tensor}"))
                }
                other => other,
            })?;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / samples.len() as f64,
            accuracy: correct as f64 / samples.len() as f64,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { params, history })
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::ModelParams;
use crate::skeleton::{DataError, Dataset, FixedSample, SplitName};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// `None` for classes absent from the split.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub sample_count: u64,
}

impl EvalReport {
    pub fn from_predictions(labels: &[usize], predictions: &[usize], classes: usize) -> Result<Self, TrainError> {
        if labels.is_empty() {
            return Err(DataError::Contract("cannot evaluate an empty split".into()).into());
        }
        if labels.len() != predictions.len() {
            return Err(TrainError::Config(format!(
                "{} labels but {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        let mut confusion = vec![vec![0u64; classes]; classes];
        for (&y, &p) in labels.iter().zip(predictions) {
            if y >= classes || p >= classes {
                return Err(TrainError::Config(format!("class index out of range for {classes} classes")));
            }
            confusion[y][p] += 1;
        }
        let trace: u64 = (0..classes).map(|k| confusion[k][k]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[k] as f64 / n as f64)
            })
            .collect();
        Ok(EvalReport {
            accuracy: trace as f64 / labels.len() as f64,
            confusion,
            per_class_accuracy,
            sample_count: labels.len() as u64,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }
}

pub fn evaluate_samples(samples: &[FixedSample], params: &ModelParams) -> Result<EvalReport, TrainError> {
    let predictions: Vec<usize> = samples
        .par_iter()
        .map(|s| params.logits(s).map(|l| argmax(l.data())))
        .collect::<Result<_, _>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    EvalReport::from_predictions(&labels, &predictions, params.config.num_classes)
}

/// Accuracy on one split, using evenly spaced frames of each un-augmented
/// sequence.
pub fn evaluate(dataset: &Dataset, split: SplitName, params: &ModelParams) -> Result<EvalReport, TrainError> {
    if dataset.num_classes() != params.config.num_classes {
        return Err(TrainError::Config(format!(
            "dataset has {} classes but the model has {}",
            dataset.num_classes(),
            params.config.num_classes
        )));
    }
    let samples: Vec<FixedSample> = dataset
        .subset(&dataset.split_indices(split))
        .iter()
        .map(|s| FixedSample::uniform(&params.config.prepare(s), params.config.frames))
        .collect::<Result<_, _>>()?;
    evaluate_samples(&samples, params)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{small_data, small_model};
    use super::*;
    use crate::tensor::Tensor;
    use rand::Rng;

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[-1.0]), 0);
    }

    #[test]
    fn perfect_classifier() {
        let labels = [0, 1, 2, 2, 1, 0];
        let r = EvalReport::from_predictions(&labels, &labels, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        assert_eq!(r.per_class_accuracy, vec![Some(1.0); 3]);
    }

    #[test]
    fn constant_predictor_on_balanced_split() {
        let labels: Vec<usize> = (0..12).map(|i| i % 4).collect();
        let r = EvalReport::from_predictions(&labels, &[0; 12], 4).unwrap();
        assert_eq!(r.accuracy, 0.25);
        for row in &r.confusion {
            assert_eq!(row, &vec![3, 0, 0, 0]);
        }
    }

    #[test]
    fn row_sums_count_classes() {
        let mut rng = crate::skeleton::stream_rng(9, 0);
        let labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        let preds: Vec<usize> = (0..200).map(|_| rng.random_range(0..5)).collect();
        let r = EvalReport::from_predictions(&labels, &preds, 5).unwrap();
        for k in 0..5 {
            let n = labels.iter().filter(|&&y| y == k).count() as u64;
            assert_eq!(r.confusion[k].iter().sum::<u64>(), n);
        }
        let total: u64 = r.confusion.iter().flatten().sum();
        let trace: u64 = (0..5).map(|k| r.confusion[k][k]).sum();
        assert_eq!(total, r.sample_count);
        assert_eq!(r.accuracy, trace as f64 / total as f64);
    }

    #[test]
    fn empty_split_is_an_error() {
        assert!(matches!(
            EvalReport::from_predictions(&[], &[], 3),
            Err(TrainError::Data(DataError::Contract(_)))
        ));
    }

    #[test]
    fn dead_network_predicts_bias_argmax() {
        let mut p = ModelParams::zeros(&small_model(3)).unwrap();
        p.fc[2].bias = Tensor::vector(vec![0.0, 1.0, 0.5]);
        let r = evaluate(&small_data(), SplitName::Test, &p).unwrap();
        assert_eq!(r.sample_count, 3);
        assert_eq!(r.confusion.iter().map(|row| row[1]).sum::<u64>(), 3);
    }

    #[test]
    fn centering_removes_global_offset() {
        let mut config = small_model(3);
        config.center = true;
        let params = ModelParams::init(&config, &mut crate::skeleton::stream_rng(4, 4)).unwrap();
        let data = small_data();
        let mut shifted = data.clone();
        for seq in &mut shifted.samples {
            for frame in &mut seq.frames {
                for joint in frame.iter_mut() {
                    joint[0] += 1.5;
                    joint[2] -= 0.75;
                }
            }
        }
        for (a, b) in data.samples.iter().zip(&shifted.samples) {
            let la = params.logits(&FixedSample::uniform(&config.prepare(a), 6).unwrap()).unwrap();
            let lb = params.logits(&FixedSample::uniform(&config.prepare(b), 6).unwrap()).unwrap();
            for (x, y) in la.data().iter().zip(lb.data()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn class_count_mismatch() {
        let p = ModelParams::zeros(&small_model(4)).unwrap();
        assert!(matches!(evaluate(&small_data(), SplitName::Test, &p), Err(TrainError::Config(_))));
    }
}

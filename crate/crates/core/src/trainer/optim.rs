use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// SGD momentum coefficient.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
        }
    }
}

pub const ADAM_EPSILON: f64 = 1e-8;

/// Optimizer state, one buffer set per parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, sizes: &[usize]) -> Self {
        let zeros = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let second = match config.kind {
            OptimizerKind::Adam => zeros(),
            OptimizerKind::SgdMomentum => Vec::new(),
        };
        Optimizer {
            config,
            steps: 0,
            first: zeros(),
            second,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update. SGD: `v ← μv + g; p ← p − η(v + λp)`. Adam: bias-corrected
    /// moments of `g + λp`.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Vec<f64>]) -> Result<(), TrainError> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(TrainError::Config(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(TrainError::Config(format!(
                    "gradient {i} has {} entries for a parameter of {}",
                    g.len(),
                    p.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFiniteGradient { tensor: i });
            }
        }
        self.steps += 1;
        let c = &self.config;
        let (lr, wd) = (c.learning_rate, c.weight_decay);
        match c.kind {
            OptimizerKind::SgdMomentum => {
                for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.first) {
                    for ((pi, &gi), vi) in p.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                        *vi = c.momentum * *vi + gi;
                        *pi -= lr * (*vi + wd * *pi);
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.steps as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for (((p, g), m), v) in params
                    .into_iter()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((pi, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        let g = gi + wd * *pi;
                        *mi = c.beta1 * *mi + (1.0 - c.beta1) * g;
                        *vi = c.beta2 * *vi + (1.0 - c.beta2) * g * g;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *pi -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sgd(lr: f64, momentum: f64, wd: f64) -> OptimizerConfig {
        OptimizerConfig {
            kind: OptimizerKind::SgdMomentum,
            learning_rate: lr,
            momentum,
            weight_decay: wd,
            ..Default::default()
        }
    }

    #[test]
    fn vanilla_sgd_step() {
        let mut p = Tensor::vector(vec![1.0, -2.0, 0.5]);
        let g = vec![vec![0.5, 1.0, -4.0]];
        let mut opt = Optimizer::new(sgd(0.1, 0.0, 0.0), &[3]);
        opt.step(vec![&mut p], &g).unwrap();
        assert_eq!(p.data(), &[1.0 - 0.05, -2.0 - 0.1, 0.5 + 0.4]);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = Tensor::vector(vec![3.0, -1.0]);
        let mut opt = Optimizer::new(sgd(0.5, 0.9, 0.0), &[2]);
        for _ in 0..3 {
            opt.step(vec![&mut p], &[vec![0.0, 0.0]]).unwrap();
        }
        assert_eq!(p.data(), &[3.0, -1.0]);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = Tensor::vector(vec![0.0]);
        let mut opt = Optimizer::new(sgd(1.0, 0.5, 0.0), &[1]);
        opt.step(vec![&mut p], &[vec![1.0]]).unwrap();
        opt.step(vec![&mut p], &[vec![1.0]]).unwrap();
        // v1 = 1, v2 = 1.5
        assert_eq!(p.data(), &[-2.5]);
    }

    #[test]
    fn adam_first_step_is_scale_free() {
        for scale in [1e-4, 1.0, 1e3] {
            let mut p = Tensor::vector(vec![0.0, 0.0]);
            let mut opt = Optimizer::new(OptimizerConfig::default(), &[2]);
            opt.step(vec![&mut p], &[vec![scale, -scale]]).unwrap();
            // m̂ = g, v̂ = g², so Δ = η·g/(|g| + ε)
            let expected = 1e-3 * scale / (scale + ADAM_EPSILON);
            assert!((p.data()[0] + expected).abs() < 1e-15);
            assert!((p.data()[1] - expected).abs() < 1e-15);
            assert!((p.data()[0].abs() - 1e-3).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut p = Tensor::vector(vec![0.0]);
        let mut opt = Optimizer::new(OptimizerConfig::default(), &[1]);
        let err = opt.step(vec![&mut p], &[vec![f64::NAN]]).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient { tensor: 0 }));
        assert_eq!(opt.steps(), 0);
    }
}

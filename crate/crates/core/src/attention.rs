//! Coupled spatial-temporal attention.
//!
//! Given a `T×N×3` skeleton tensor `X`:
//!
//! * spatial weights `s_i = σ(W_s · y_i + b_s[i])`, where `y_i ∈ R^{3T}` is
//!   joint `i` across all frames;
//! * temporal weights `t_k = σ(W_t · z_k + b_t[k])`, where `z_k ∈ R^{3N}` is
//!   frame `k` across all joints;
//! * the coupled map `M = t ⊗ s` (`T×N`, rank one);
//! * the attended output `O[t][j][c] = M[t][j] · X[t][j][c]`.
//!
//! `W_s` and `W_t` are single row vectors shared by all joints (frames);
//! only the biases are per joint (frame). `σ` is the logistic sigmoid.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Tape, Tensor, TensorError, Var};

/// Which attention branches are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AttentionMode {
    #[default]
    #[serde(rename = "full")]
    Full,
    /// Spatial weights fixed to 1.
    #[serde(rename = "without_S")]
    WithoutS,
    /// Temporal weights fixed to 1.
    #[serde(rename = "without_T")]
    WithoutT,
    /// Attention bypassed: the block returns its input.
    #[serde(rename = "without_ST")]
    WithoutST,
}

impl AttentionMode {
    pub const ALL: [AttentionMode; 4] = [
        AttentionMode::Full,
        AttentionMode::WithoutS,
        AttentionMode::WithoutT,
        AttentionMode::WithoutST,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttentionMode::Full => "full",
            AttentionMode::WithoutS => "without_S",
            AttentionMode::WithoutT => "without_T",
            AttentionMode::WithoutST => "without_ST",
        }
    }

    fn uses_spatial(self) -> bool {
        matches!(self, AttentionMode::Full | AttentionMode::WithoutT)
    }

    fn uses_temporal(self) -> bool {
        matches!(self, AttentionMode::Full | AttentionMode::WithoutS)
    }
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttentionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttentionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown attention mode {s:?} (expected full, without_S, without_T or without_ST)"))
    }
}

/// Learnable weights of both attention subnetworks.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `1 × 3T`
    pub spatial_weight: Tensor,
    /// `N`
    pub spatial_bias: Tensor,
    /// `1 × 3N`
    pub temporal_weight: Tensor,
    /// `T`
    pub temporal_bias: Tensor,
}

impl AttentionParams {
    pub fn zeros(frames: usize, joints: usize) -> Self {
        AttentionParams {
            spatial_weight: Tensor::zeros(&[1, 3 * frames]),
            spatial_bias: Tensor::zeros(&[joints]),
            temporal_weight: Tensor::zeros(&[1, 3 * joints]),
            temporal_bias: Tensor::zeros(&[frames]),
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(frames: usize, joints: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(frames, joints);
        let ls = 1.0 / ((3 * frames) as f64).sqrt();
        let lt = 1.0 / ((3 * joints) as f64).sqrt();
        p.spatial_weight.data_mut().iter_mut().for_each(|w| *w = rng.random_range(-ls..ls));
        p.temporal_weight.data_mut().iter_mut().for_each(|w| *w = rng.random_range(-lt..lt));
        p
    }

    pub fn frames(&self) -> usize {
        self.temporal_bias.len()
    }

    pub fn joints(&self) -> usize {
        self.spatial_bias.len()
    }

    pub fn check(&self) -> Result<(), TensorError> {
        let (t, n) = (self.frames(), self.joints());
        let expect = [
            (self.spatial_weight.shape(), vec![1, 3 * t]),
            (self.spatial_bias.shape(), vec![n]),
            (self.temporal_weight.shape(), vec![1, 3 * n]),
            (self.temporal_bias.shape(), vec![t]),
        ];
        for (got, want) in expect {
            if got != want.as_slice() {
                return Err(TensorError::Shape {
                    op: "attention_params",
                    lhs: got.to_vec(),
                    rhs: want,
                });
            }
        }
        Ok(())
    }

    pub fn bind<'p>(&'p self, tape: &mut Tape<'p>) -> BoundAttention {
        BoundAttention {
            spatial_weight: tape.param(&self.spatial_weight),
            spatial_bias: tape.param(&self.spatial_bias),
            temporal_weight: tape.param(&self.temporal_weight),
            temporal_bias: tape.param(&self.temporal_bias),
        }
    }

    /// Tape-free evaluation.
    pub fn forward(&self, x: &Tensor, mode: AttentionMode) -> Result<AttentionOutput, TensorError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let out = csta_forward(&mut tape, xv, &bound, mode)?;
        Ok(out.read(&tape))
    }
}

/// [`AttentionParams`] registered on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundAttention {
    pub spatial_weight: Var,
    pub spatial_bias: Var,
    pub temporal_weight: Var,
    pub temporal_bias: Var,
}

impl BoundAttention {
    pub fn vars(&self) -> [Var; 4] {
        [
            self.spatial_weight,
            self.spatial_bias,
            self.temporal_weight,
            self.temporal_bias,
        ]
    }
}

fn input_dims(tape: &Tape<'_>, x: Var) -> Result<(usize, usize), TensorError> {
    match tape.shape(x) {
        [t, n, 3] => Ok((*t, *n)),
        s => Err(TensorError::Shape {
            op: "attention",
            lhs: s.to_vec(),
            rhs: vec![0, 0, 3],
        }),
    }
}

fn gate(tape: &mut Tape<'_>, rows: Var, weight: Var, bias: Var) -> Result<Var, TensorError> {
    let count = tape.shape(rows)[0];
    let wt = tape.permute(weight, &[1, 0])?;
    let scores = tape.matmul(rows, wt)?;
    let scores = tape.reshape(scores, &[count])?;
    let pre = tape.add(scores, bias)?;
    tape.sigmoid(pre)
}

/// Per-joint weights, length `N`.
pub fn spatial_attention(
    tape: &mut Tape<'_>,
    x: Var,
    weight: Var,
    bias: Var,
) -> Result<Var, TensorError> {
    let (t, n) = input_dims(tape, x)?;
    let by_joint = tape.permute(x, &[1, 0, 2])?;
    let y = tape.reshape(by_joint, &[n, 3 * t])?;
    gate(tape, y, weight, bias)
}

/// Per-frame weights, length `T`.
pub fn temporal_attention(
    tape: &mut Tape<'_>,
    x: Var,
    weight: Var,
    bias: Var,
) -> Result<Var, TensorError> {
    let (t, n) = input_dims(tape, x)?;
    let z = tape.reshape(x, &[t, 3 * n])?;
    gate(tape, z, weight, bias)
}

/// `T×N` map `t_att ⊗ s_att`.
pub fn couple(tape: &mut Tape<'_>, s_att: Var, t_att: Var) -> Result<Var, TensorError> {
    tape.outer(t_att, s_att)
}

/// Scales every coordinate of `x` by the map entry of its (frame, joint).
pub fn apply_attention(tape: &mut Tape<'_>, x: Var, map: Var) -> Result<Var, TensorError> {
    tape.mul(x, map)
}

/// Attention results as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub s_att: Var,
    pub t_att: Var,
    pub map: Var,
    pub applied: Var,
}

impl AttentionVars {
    pub fn read(&self, tape: &Tape<'_>) -> AttentionOutput {
        AttentionOutput {
            s_att: tape.value(self.s_att).clone(),
            t_att: tape.value(self.t_att).clone(),
            map: tape.value(self.map).clone(),
            applied: tape.value(self.applied).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub s_att: Tensor,
    pub t_att: Tensor,
    pub map: Tensor,
    pub applied: Tensor,
}

/// Runs the attention block in the given mode. Disabled branches contribute
/// constant all-ones weights; `WithoutST` returns `x` itself as `applied`.
pub fn csta_forward(
    tape: &mut Tape<'_>,
    x: Var,
    params: &BoundAttention,
    mode: AttentionMode,
) -> Result<AttentionVars, TensorError> {
    let (t, n) = input_dims(tape, x)?;
    let s_att = if mode.uses_spatial() {
        spatial_attention(tape, x, params.spatial_weight, params.spatial_bias)?
    } else {
        tape.constant(Tensor::ones(&[n]))
    };
    let t_att = if mode.uses_temporal() {
        temporal_attention(tape, x, params.temporal_weight, params.temporal_bias)?
    } else {
        tape.constant(Tensor::ones(&[t]))
    };
    let map = couple(tape, s_att, t_att)?;
    let applied = if mode == AttentionMode::WithoutST {
        x
    } else {
        apply_attention(tape, x, map)?
    };
    Ok(AttentionVars {
        s_att,
        t_att,
        map,
        applied,
    })
}

use std::borrow::Cow;

use super::kernels::{self, ConvGeometry};
use super::{check_shape, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    Outer { u: Var, v: Var },
    Mul { a: Var, b: Var },
    /// `b` is broadcast along the trailing axis of `a`, which has `width` entries.
    MulTrailing { a: Var, b: Var, width: usize },
    Add { a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    Sigmoid { x: Var },
    Relu { x: Var },
    Conv2d {
        input: Var,
        kernels: Var,
        geometry: ConvGeometry,
        cols: Vec<f64>,
    },
    ChannelBias { x: Var, bias: Var },
    Linear { x: Var, w: Var, b: Var },
    SoftmaxCrossEntropy { logits: Var, label: usize, probs: Vec<f64> },
    Reshape { x: Var },
    Permute { x: Var, axes: Vec<usize> },
    Concat { inputs: Vec<Var>, axis: usize },
    Sum { x: Var },
}

#[derive(Debug)]
struct Node<'p> {
    value: Cow<'p, Tensor>,
    requires_grad: bool,
    op: Op,
}

/// Records operations in execution order for a single reverse sweep.
///
/// Leaves may borrow their values (`'p`), so model parameters can be bound
/// onto many short-lived tapes without copying.
#[derive(Debug, Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
    grads: Vec<Option<Vec<f64>>>,
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// An owned leaf.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push_unchecked(Cow::Owned(value), requires_grad, Op::Leaf)
    }

    /// A leaf that borrows its value, typically a model parameter.
    pub fn param(&mut self, value: &'p Tensor) -> Var {
        self.push_unchecked(Cow::Borrowed(value), true, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient left by the last [`Tape::backward`] call, if `v` received one.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.shape(v).to_vec(), g.clone()).expect("gradient shape"))
    }

    /// Gradient as a flat slice, without copying.
    pub fn grad_data(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0)?.as_deref()
    }

    /// Moves the gradient of `v` out of the tape.
    pub fn take_grad_data(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(v.0)?.take()
    }

    fn push_unchecked(&mut self, value: Cow<'p, Tensor>, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, inputs: &[Var], op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_unchecked(Cow::Owned(value), requires_grad, op))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 {
            return Err(rank_err("matmul", 2, sa));
        }
        if sb.len() != 2 {
            return Err(rank_err("matmul", 2, sb));
        }
        if sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::gemm_nn(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let value = Tensor::new(vec![m, n], out)?;
        self.push("matmul", value, &[a, b], Op::MatMul { a, b })
    }

    pub fn outer(&mut self, u: Var, v: Var) -> Result<Var, TensorError> {
        for x in [u, v] {
            if self.shape(x).len() != 1 {
                return Err(rank_err("outer_product", 1, self.shape(x)));
            }
        }
        let (du, dv) = (self.value(u).data(), self.value(v).data());
        let mut out = Vec::with_capacity(du.len() * dv.len());
        for &x in du {
            out.extend(dv.iter().map(|&y| x * y));
        }
        let value = Tensor::new(vec![du.len(), dv.len()], out)?;
        self.push("outer_product", value, &[u, v], Op::Outer { u, v })
    }

    /// Elementwise product. `b` may either match `a` exactly or match all but
    /// the trailing axis of `a`, in which case it is repeated along that axis.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            let data: Vec<f64> = self
                .value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x * y)
                .collect();
            let value = Tensor::new(sa.to_vec(), data)?;
            return self.push("elementwise_mul", value, &[a, b], Op::Mul { a, b });
        }
        if sa.len() == sb.len() + 1 && sa[..sb.len()] == *sb {
            let width = *sa.last().unwrap();
            let (da, db) = (self.value(a).data(), self.value(b).data());
            let mut data = Vec::with_capacity(da.len());
            for (chunk, &s) in da.chunks_exact(width).zip(db) {
                data.extend(chunk.iter().map(|&x| x * s));
            }
            let value = Tensor::new(sa.to_vec(), data)?;
            return self.push("elementwise_mul", value, &[a, b], Op::MulTrailing { a, b, width });
        }
        Err(shape_err("elementwise_mul", sa, sb))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        check_shape("add", self.shape(a), self.shape(b))?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push("add", value, &[a, b], Op::Add { a, b })
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, TensorError> {
        let data = self.value(x).data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data)?;
        self.push("scale", value, &[x], Op::Scale { x, factor })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, TensorError> {
        let data = self.value(x).data().iter().map(|&v| kernels::sigmoid(v)).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data)?;
        self.push("sigmoid", value, &[x], Op::Sigmoid { x })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        let data = self.value(x).data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(self.shape(x).to_vec(), data)?;
        self.push("relu", value, &[x], Op::Relu { x })
    }

    /// 2-D cross-correlation of a `C_in×H×W` input with `C_out×C_in×kh×kw` kernels.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernels: Var,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Var, TensorError> {
        let (si, sk) = (self.shape(input), self.shape(kernels));
        if si.len() != 3 {
            return Err(rank_err("conv2d", 3, si));
        }
        if sk.len() != 4 {
            return Err(rank_err("conv2d", 4, sk));
        }
        if sk[1] != si[0] {
            return Err(shape_err("conv2d", si, sk));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(TensorError::Contract("conv2d stride must be positive".into()));
        }
        if sk[2] > si[1] + 2 * padding.0 || sk[3] > si[2] + 2 * padding.1 {
            return Err(shape_err("conv2d", si, sk));
        }
        let geometry = ConvGeometry {
            channels: si[0],
            height: si[1],
            width: si[2],
            kernel_h: sk[2],
            kernel_w: sk[3],
            stride,
            padding,
        };
        let out_channels = sk[0];
        let cols = kernels::im2col(&geometry, self.value(input).data());
        let positions = geometry.out_positions();
        let mut out = vec![0.0; out_channels * positions];
        kernels::gemm_nn(
            out_channels,
            geometry.patch_len(),
            positions,
            self.value(kernels).data(),
            &cols,
            &mut out,
        );
        let value = Tensor::new(
            vec![out_channels, geometry.out_height(), geometry.out_width()],
            out,
        )?;
        self.push(
            "conv2d",
            value,
            &[input, kernels],
            Op::Conv2d {
                input,
                kernels,
                geometry,
                cols,
            },
        )
    }

    /// Adds `bias[c]` to every element of channel `c` of a `C×…` tensor.
    pub fn channel_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sb.len() != 1 || sx.is_empty() || sx[0] != sb[0] {
            return Err(shape_err("channel_bias", sx, sb));
        }
        let per_channel = self.value(x).len() / sb[0];
        let bd = self.value(bias).data();
        let data = self
            .value(x)
            .data()
            .chunks_exact(per_channel)
            .zip(bd)
            .flat_map(|(chunk, &b)| chunk.iter().map(move |v| v + b))
            .collect();
        let value = Tensor::new(sx.to_vec(), data)?;
        self.push("channel_bias", value, &[x, bias], Op::ChannelBias { x, bias })
    }

    /// `W·x + b` for `x: [d_in]`, `W: [d_out×d_in]`, `b: [d_out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        if sx.len() != 1 {
            return Err(rank_err("linear", 1, sx));
        }
        if sw.len() != 2 || sw[1] != sx[0] {
            return Err(shape_err("linear", sw, sx));
        }
        if sb != [sw[0]] {
            return Err(shape_err("linear", sw, sb));
        }
        let d_in = sx[0];
        let (xd, wd, bd) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let data = wd
            .chunks_exact(d_in)
            .zip(bd)
            .map(|(row, &bias)| kernels::dot(row, xd) + bias)
            .collect();
        let value = Tensor::new(vec![sw[0]], data)?;
        self.push("linear", value, &[x, w, b], Op::Linear { x, w, b })
    }

    /// `-log softmax(logits)[label]`, as a scalar.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, TensorError> {
        let s = self.shape(logits);
        if s.len() != 1 {
            return Err(rank_err("softmax_cross_entropy", 1, s));
        }
        let classes = s[0];
        if label >= classes {
            return Err(TensorError::Index {
                index: label,
                classes,
            });
        }
        let z = self.value(logits).data();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let loss = total.ln() - (z[label] - max);
        let probs = exps.iter().map(|e| e / total).collect();
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss),
            &[logits],
            Op::SoftmaxCrossEntropy {
                logits,
                label,
                probs,
            },
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let value = Tensor::new(shape.to_vec(), self.value(x).data().to_vec()).map_err(|_| {
            TensorError::Shape {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape.to_vec(),
            }
        })?;
        self.push("reshape", value, &[x], Op::Reshape { x })
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        if axes.len() != shape.len() || axes.iter().any(|&a| a >= shape.len() || std::mem::replace(&mut seen[a], true)) {
            return Err(TensorError::Shape {
                op: "permute",
                lhs: shape,
                rhs: axes.to_vec(),
            });
        }
        let data = permute_data(self.value(x).data(), &shape, axes);
        let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
        let value = Tensor::new(out_shape, data)?;
        self.push(
            "permute",
            value,
            &[x],
            Op::Permute {
                x,
                axes: axes.to_vec(),
            },
        )
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = inputs
            .first()
            .ok_or_else(|| TensorError::Contract("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(rank_err("concat", axis + 1, &base));
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(shape_err("concat", &base, s));
            }
            out_shape[axis] += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &v in inputs {
                let chunk: usize = self.shape(v)[axis..].iter().product();
                data.extend_from_slice(&self.value(v).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(out_shape, data)?;
        self.push(
            "concat",
            value,
            inputs,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let total = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(total), &[x], Op::Sum { x })
    }

    /// Reverse sweep from a scalar `loss`. Replaces any gradients from a
    /// previous sweep; afterwards [`Tape::grad`] returns `d loss / d v` for
    /// every `v` that requires a gradient and influences `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.backprop_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (grad, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *grad = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = self.nodes[id].value.as_ref();
        let mut send = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &mut |ga| kernels::gemm_nt(m, n, k, g, bd, ga));
                send(*b, &mut |gb| kernels::gemm_tn(k, m, n, ad, g, gb));
            }
            Op::Outer { u, v } => {
                let (ud, vd) = (self.value(*u).data(), self.value(*v).data());
                let q = vd.len();
                send(*u, &mut |gu| {
                    for (i, gi) in gu.iter_mut().enumerate() {
                        *gi += kernels::dot(&g[i * q..(i + 1) * q], vd);
                    }
                });
                send(*v, &mut |gv| {
                    for (i, &ui) in ud.iter().enumerate() {
                        kernels::axpy(ui, &g[i * q..(i + 1) * q], gv);
                    }
                });
            }
            Op::Mul { a, b } => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * bd[i];
                    }
                });
                send(*b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * ad[i];
                    }
                });
            }
            Op::MulTrailing { a, b, width } => {
                let w = *width;
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &mut |ga| {
                    for (i, &s) in bd.iter().enumerate() {
                        for c in i * w..(i + 1) * w {
                            ga[c] += g[c] * s;
                        }
                    }
                });
                send(*b, &mut |gb| {
                    for (i, gi) in gb.iter_mut().enumerate() {
                        *gi += kernels::dot(&g[i * w..(i + 1) * w], &ad[i * w..(i + 1) * w]);
                    }
                });
            }
            Op::Add { a, b } => {
                send(*a, &mut |ga| kernels::axpy(1.0, g, ga));
                send(*b, &mut |gb| kernels::axpy(1.0, g, gb));
            }
            Op::Scale { x, factor } => send(*x, &mut |gx| kernels::axpy(*factor, g, gx)),
            Op::Sigmoid { x } => {
                let y = out.data();
                send(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Relu { x } => {
                let xd = self.value(*x).data();
                send(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        if xd[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                });
            }
            Op::Conv2d {
                input,
                kernels: k,
                geometry,
                cols,
            } => {
                let out_channels = self.shape(*k)[0];
                let patch = geometry.patch_len();
                let positions = geometry.out_positions();
                send(*k, &mut |gk| kernels::gemm_nt(out_channels, positions, patch, g, cols, gk));
                let kd = self.value(*k).data();
                send(*input, &mut |gi| {
                    let mut dcols = vec![0.0; patch * positions];
                    kernels::gemm_tn(patch, out_channels, positions, kd, g, &mut dcols);
                    kernels::col2im_add(geometry, &dcols, gi);
                });
            }
            Op::ChannelBias { x, bias } => {
                send(*x, &mut |gx| kernels::axpy(1.0, g, gx));
                let channels = self.shape(*bias)[0];
                let per_channel = g.len() / channels;
                send(*bias, &mut |gb| {
                    for (c, chunk) in g.chunks_exact(per_channel).enumerate() {
                        gb[c] += chunk.iter().sum::<f64>();
                    }
                });
            }
            Op::Linear { x, w, b } => {
                let (xd, wd) = (self.value(*x).data(), self.value(*w).data());
                let d_in = xd.len();
                // rows with zero upstream gradient (dead ReLU units) add nothing
                send(*x, &mut |gx| {
                    for (row, &gi) in wd.chunks_exact(d_in).zip(g) {
                        if gi != 0.0 {
                            kernels::axpy(gi, row, gx);
                        }
                    }
                });
                send(*w, &mut |gw| {
                    for (row, &gi) in gw.chunks_exact_mut(d_in).zip(g) {
                        if gi != 0.0 {
                            kernels::axpy(gi, xd, row);
                        }
                    }
                });
                send(*b, &mut |gb| kernels::axpy(1.0, g, gb));
            }
            Op::SoftmaxCrossEntropy {
                logits,
                label,
                probs,
            } => {
                let upstream = g[0];
                send(*logits, &mut |gl| {
                    for (i, p) in probs.iter().enumerate() {
                        let target = if i == *label { 1.0 } else { 0.0 };
                        gl[i] += upstream * (p - target);
                    }
                });
            }
            Op::Reshape { x } => send(*x, &mut |gx| kernels::axpy(1.0, g, gx)),
            Op::Permute { x, axes } => {
                let mut inverse = vec![0; axes.len()];
                for (i, &a) in axes.iter().enumerate() {
                    inverse[a] = i;
                }
                let back = permute_data(g, out.shape(), &inverse);
                send(*x, &mut |gx| kernels::axpy(1.0, &back, gx));
            }
            Op::Concat { inputs, axis } => {
                let outer: usize = out.shape()[..*axis].iter().product();
                let mut offset = 0;
                let total: usize = out.shape()[*axis..].iter().product();
                for &v in inputs {
                    let chunk: usize = self.shape(v)[*axis..].iter().product();
                    send(v, &mut |gv| {
                        for o in 0..outer {
                            let src = &g[o * total + offset..o * total + offset + chunk];
                            kernels::axpy(1.0, src, &mut gv[o * chunk..(o + 1) * chunk]);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Sum { x } => {
                let upstream = g[0];
                send(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += upstream));
            }
        }
    }
}

fn rank_err(op: &'static str, expected: usize, shape: &[usize]) -> TensorError {
    TensorError::Rank {
        op,
        expected,
        shape: shape.to_vec(),
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn permute_data(data: &[f64], shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let out_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; rank];
    let mut src = 0usize;
    for _ in 0..data.len() {
        out.push(data[src]);
        // odometer increment over output index, tracking source offset
        for d in (0..rank).rev() {
            idx[d] += 1;
            src += out_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            src -= out_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    out
}

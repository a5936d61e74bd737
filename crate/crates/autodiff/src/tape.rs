//! Define-by-run tape for reverse-mode differentiation.
//!
//! Every op appends a node holding its output value; inputs always refer to
//! earlier nodes, so the node list is a topological order and the backward
//! pass is a single reverse sweep. Gradients accumulate additively when a
//! node fans out to several consumers.
//!
//! Shapes never broadcast. The only mixed-shape op is [`Tape::scale`], which
//! multiplies by a plain `f64`.

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    MatMul,
    Concat,
    Slice,
    Reshape,
    Tanh,
    Sigmoid,
    Softmax,
    Sum,
    Mean,
    SumAxis,
    MeanAxis,
    Scale,
    Ln,
    Clamp,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::MatMul => "matmul",
            OpKind::Concat => "concat",
            OpKind::Slice => "slice",
            OpKind::Reshape => "reshape",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Softmax => "softmax",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::SumAxis => "sum_axis",
            OpKind::MeanAxis => "mean_axis",
            OpKind::Scale => "scale",
            OpKind::Ln => "ln",
            OpKind::Clamp => "clamp",
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    SumAxis {
        input: Var,
        axis: usize,
    },
    MeanAxis {
        input: Var,
        axis: usize,
    },
    Scale(Var, f64),
    Ln(Var),
    Clamp {
        input: Var,
        lo: f64,
        hi: f64,
    },
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Concat { .. } => OpKind::Concat,
            Op::Slice { .. } => OpKind::Slice,
            Op::Reshape(..) => OpKind::Reshape,
            Op::Tanh(..) => OpKind::Tanh,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Softmax(..) => OpKind::Softmax,
            Op::Sum(..) => OpKind::Sum,
            Op::Mean(..) => OpKind::Mean,
            Op::SumAxis { .. } => OpKind::SumAxis,
            Op::MeanAxis { .. } => OpKind::MeanAxis,
            Op::Scale(..) => OpKind::Scale,
            Op::Ln(..) => OpKind::Ln,
            Op::Clamp { .. } => OpKind::Clamp,
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded computation graph. Confined to one thread; build one per forward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node on the tape.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`; nodes that do not influence the root get zeros.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn get_ref(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// Splits a shape around `axis` into (outer, axis length, inner) extents.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// C[m×n] += A[m×k] · B[k×n]
fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

// C[m×k] += G[m×n] · B[k×n]ᵀ
fn gemm_nt_acc(g: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            let dot: f64 = g_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            c[i * k + p] += dot;
        }
    }
}

// C[k×n] += A[m×k]ᵀ · G[m×n]
fn gemm_tn_acc(a: &[f64], g: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, gv) in c_row.iter_mut().zip(g_row) {
                *cv += aip * gv;
            }
        }
    }
}

/// Resolved matmul operand layout: left is m×k, right is k×n, output shape.
fn matmul_dims(a: &[usize], b: &[usize]) -> Option<(usize, usize, usize, Vec<usize>)> {
    match (a, b) {
        (&[m, k], &[k2, n]) if k == k2 => Some((m, k, n, vec![m, n])),
        (&[m, k], &[k2]) if k == k2 => Some((m, k, 1, vec![m])),
        (&[k], &[k2, n]) if k == k2 => Some((1, k, n, vec![n])),
        (&[k], &[k2]) if k == k2 => Some((1, k, 1, vec![1])),
        _ => None,
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn op_kind(&self, var: Var) -> OpKind {
        self.nodes[var.0].op.kind()
    }

    /// Records an input tensor (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(AutodiffError::NonFinite {
                op: op.kind().name(),
            });
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    fn zip_map(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op_name, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Tensor::from_raw(ta.shape().to_vec(), data))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::from_raw(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map("add", a, b, |x, y| x + y)?;
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map("sub", a, b, |x, y| x - y)?;
        self.push(Op::Sub(a, b), v)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map("mul", a, b, |x, y| x * y)?;
        self.push(Op::Mul(a, b), v)
    }

    /// Matrix product. A rank-1 left operand acts as a row vector and a rank-1
    /// right operand as a column vector; the vector dimension is dropped from
    /// the output (vector·vector yields shape `[1]`).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k, n, out_shape) =
            matmul_dims(ta.shape(), tb.shape()).ok_or_else(|| mismatch("matmul", ta, tb))?;
        let mut out = vec![0.0; m * n];
        gemm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        self.push(Op::MatMul(a, b), Tensor::from_raw(out_shape, out))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| {
            AutodiffError::InvalidArgument("concat needs at least one input".into())
        })?;
        let base = self.value(first).shape().to_vec();
        if axis >= base.len() {
            return Err(AutodiffError::InvalidShape {
                op: "concat",
                shape: base,
                reason: format!("axis {axis} out of range"),
            });
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.value(v).shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(mismatch("concat", self.value(first), self.value(v)));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_at_axis(&out_shape, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let block = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        self.push(
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            Tensor::from_raw(out_shape, out),
        )
    }

    /// Keeps indices `start..end` along `axis`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let t = self.value(input);
        if axis >= t.rank() || start >= end || end > t.shape()[axis] {
            return Err(AutodiffError::InvalidShape {
                op: "slice",
                shape: t.shape().to_vec(),
                reason: format!("cannot take {start}..{end} along axis {axis}"),
            });
        }
        let (outer, len, inner) = split_at_axis(t.shape(), axis);
        let width = end - start;
        let mut out = Vec::with_capacity(outer * width * inner);
        for o in 0..outer {
            let base = o * len * inner;
            out.extend_from_slice(&t.data()[base + start * inner..base + end * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = width;
        self.push(
            Op::Slice { input, axis, start },
            Tensor::from_raw(shape, out),
        )
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(input);
        if shape.is_empty() || shape.contains(&0) || shape.iter().product::<usize>() != t.len() {
            return Err(AutodiffError::InvalidShape {
                op: "reshape",
                shape: shape.to_vec(),
                reason: format!("cannot reshape {:?}", t.shape()),
            });
        }
        let v = t.clone().with_shape(shape);
        self.push(Op::Reshape(input), v)
    }

    pub fn tanh(&mut self, input: Var) -> Result<Var> {
        let v = self.map(input, f64::tanh);
        self.push(Op::Tanh(input), v)
    }

    /// Logistic sigmoid.
    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        let v = self.map(input, stable_sigmoid);
        self.push(Op::Sigmoid(input), v)
    }

    /// Softmax along the last axis, computed with max subtraction.
    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input);
        let width = *t.shape().last().expect("rank >= 1");
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(width) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let shape = t.shape().to_vec();
        self.push(Op::Softmax(input), Tensor::from_raw(shape, out))
    }

    /// Sum of all entries, shape `[1]`.
    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let s = self.value(input).data().iter().sum();
        self.push(Op::Sum(input), Tensor::from_raw(vec![1], vec![s]))
    }

    /// Mean of all entries, shape `[1]`.
    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(input), Tensor::from_raw(vec![1], vec![s]))
    }

    fn reduce_axis(&self, op: &'static str, input: Var, axis: usize) -> Result<Tensor> {
        let t = self.value(input);
        if axis >= t.rank() {
            return Err(AutodiffError::InvalidShape {
                op,
                shape: t.shape().to_vec(),
                reason: format!("axis {axis} out of range"),
            });
        }
        let (outer, len, inner) = split_at_axis(t.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let src = &t.data()[(o * len + a) * inner..(o * len + a + 1) * inner];
                for (dst, s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *dst += s;
                }
            }
        }
        let mut shape = t.shape().to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Tensor::from_raw(shape, out))
    }

    /// Sum along `axis`; the axis is removed from the shape.
    pub fn sum_axis(&mut self, input: Var, axis: usize) -> Result<Var> {
        let v = self.reduce_axis("sum_axis", input, axis)?;
        self.push(Op::SumAxis { input, axis }, v)
    }

    /// Mean along `axis`; the axis is removed from the shape.
    pub fn mean_axis(&mut self, input: Var, axis: usize) -> Result<Var> {
        let n = self.value(input).shape().get(axis).copied().unwrap_or(1) as f64;
        let mut v = self.reduce_axis("mean_axis", input, axis)?;
        v.data_mut().iter_mut().for_each(|x| *x /= n);
        self.push(Op::MeanAxis { input, axis }, v)
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        if !factor.is_finite() {
            return Err(AutodiffError::NonFinite { op: "scale" });
        }
        let v = self.map(input, |x| x * factor);
        self.push(Op::Scale(input, factor), v)
    }

    /// Natural logarithm; every entry must be strictly positive.
    pub fn ln(&mut self, input: Var) -> Result<Var> {
        if self.value(input).data().iter().any(|&x| x <= 0.0) {
            return Err(AutodiffError::NonFinite { op: "ln" });
        }
        let v = self.map(input, f64::ln);
        self.push(Op::Ln(input), v)
    }

    /// Clamps entries into `[lo, hi]`; gradient flows only where the input lies
    /// inside the closed interval.
    pub fn clamp(&mut self, input: Var, lo: f64, hi: f64) -> Result<Var> {
        if !(lo <= hi) {
            return Err(AutodiffError::InvalidArgument(format!(
                "clamp bounds {lo} > {hi}"
            )));
        }
        let v = self.map(input, |x| x.clamp(lo, hi));
        self.push(Op::Clamp { input, lo, hi }, v)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(AutodiffError::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::filled(root_value.shape(), 1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, self.scaled(g, -1.0));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, hadamard(g, vb));
                accumulate(grads, *b, hadamard(g, va));
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n, _) = matmul_dims(va.shape(), vb.shape()).expect("checked in forward");
                let mut ga = vec![0.0; m * k];
                gemm_nt_acc(g.data(), vb.data(), &mut ga, m, n, k);
                let mut gb = vec![0.0; k * n];
                gemm_tn_acc(va.data(), g.data(), &mut gb, m, k, n);
                accumulate(grads, *a, Tensor::from_raw(va.shape().to_vec(), ga));
                accumulate(grads, *b, Tensor::from_raw(vb.shape().to_vec(), gb));
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_at_axis(g.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let shape = self.value(v).shape();
                    let width = shape[*axis];
                    let mut part = Vec::with_capacity(outer * width * inner);
                    for o in 0..outer {
                        let base = o * total * inner + offset * inner;
                        part.extend_from_slice(&g.data()[base..base + width * inner]);
                    }
                    accumulate(grads, v, Tensor::from_raw(shape.to_vec(), part));
                    offset += width;
                }
            }
            Op::Slice { input, axis, start } => {
                let shape = self.value(*input).shape();
                let (outer, len, inner) = split_at_axis(shape, *axis);
                let width = g.shape()[*axis];
                let mut full = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    let dst = o * len * inner + start * inner;
                    full[dst..dst + width * inner]
                        .copy_from_slice(&g.data()[o * width * inner..(o + 1) * width * inner]);
                }
                accumulate(grads, *input, Tensor::from_raw(shape.to_vec(), full));
            }
            Op::Reshape(input) => {
                let shape = self.value(*input).shape();
                accumulate(grads, *input, g.clone().with_shape(shape));
            }
            Op::Tanh(input) => {
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(g, y)| g * (1.0 - y * y));
                accumulate(
                    grads,
                    *input,
                    Tensor::from_raw(y.shape().to_vec(), data.collect()),
                );
            }
            Op::Sigmoid(input) => {
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(g, y)| g * y * (1.0 - y));
                accumulate(
                    grads,
                    *input,
                    Tensor::from_raw(y.shape().to_vec(), data.collect()),
                );
            }
            Op::Softmax(input) => {
                let y = &node.value;
                let width = *y.shape().last().expect("rank >= 1");
                let mut out = Vec::with_capacity(y.len());
                for (gr, yr) in g.data().chunks(width).zip(y.data().chunks(width)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    out.extend(gr.iter().zip(yr).map(|(gi, yi)| yi * (gi - dot)));
                }
                accumulate(grads, *input, Tensor::from_raw(y.shape().to_vec(), out));
            }
            Op::Sum(input) => {
                let shape = self.value(*input).shape();
                accumulate(grads, *input, Tensor::filled(shape, g.data()[0]));
            }
            Op::Mean(input) => {
                let t = self.value(*input);
                accumulate(
                    grads,
                    *input,
                    Tensor::filled(t.shape(), g.data()[0] / t.len() as f64),
                );
            }
            Op::SumAxis { input, axis } | Op::MeanAxis { input, axis } => {
                let shape = self.value(*input).shape();
                let (outer, len, inner) = split_at_axis(shape, *axis);
                let factor = if matches!(node.op, Op::MeanAxis { .. }) {
                    1.0 / len as f64
                } else {
                    1.0
                };
                let mut full = Vec::with_capacity(outer * len * inner);
                for o in 0..outer {
                    let src = &g.data()[o * inner..(o + 1) * inner];
                    for _ in 0..len {
                        full.extend(src.iter().map(|v| v * factor));
                    }
                }
                accumulate(grads, *input, Tensor::from_raw(shape.to_vec(), full));
            }
            Op::Scale(input, factor) => {
                accumulate(grads, *input, self.scaled(g, *factor));
            }
            Op::Ln(input) => {
                let x = self.value(*input);
                let data = g.data().iter().zip(x.data()).map(|(g, x)| g / x);
                accumulate(
                    grads,
                    *input,
                    Tensor::from_raw(x.shape().to_vec(), data.collect()),
                );
            }
            Op::Clamp { input, lo, hi } => {
                let x = self.value(*input);
                let data = g.data().iter().zip(x.data()).map(|(g, x)| {
                    if *x >= *lo && *x <= *hi {
                        *g
                    } else {
                        0.0
                    }
                });
                accumulate(
                    grads,
                    *input,
                    Tensor::from_raw(x.shape().to_vec(), data.collect()),
                );
            }
        }
    }

    fn scaled(&self, g: &Tensor, factor: f64) -> Tensor {
        Tensor::from_raw(
            g.shape().to_vec(),
            g.data().iter().map(|v| v * factor).collect(),
        )
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor::from_raw(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect(),
    )
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as a node appended to a flat tape, so
//! node indices are already a topological order and `backward` is a single
//! reverse sweep. Parameter leaves borrow their value from a [`ParamSet`]
//! instead of copying it; their gradients are collected into [`ParamGrads`].
//!
//! All graph tensors are 2-D. Vectors are `1 × n` rows and scalars `1 × 1`.

use std::borrow::Cow;

use super::params::{ParamGrads, ParamId, ParamSet};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Gather { table: ParamId, ids: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRowBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Act(Activation, Var),
    SoftmaxRows(Var),
    MaskedSoftmax(Var, usize),
    Transpose(Var),
    Conv1d { input: Var, filters: Var, bias: Var, k: usize },
    MaxOverTime { input: Var, argmax: Vec<usize> },
    Dropout { input: Var, mask: Vec<f64> },
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    SliceRows { input: Var, start: usize },
    SliceCols { input: Var, start: usize },
    Sum(Var),
    MeanRows(Var),
    Bce { logits: Var, targets: Vec<f64> },
    SumSquares { inputs: Vec<Var>, lambda: f64 },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
}

/// A single forward computation. Build it, call [`Graph::backward`], drop it.
#[derive(Default)]
pub struct Graph<'p> {
    nodes: Vec<Node<'p>>,
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let s = self.nodes[v.0].value.shape();
        debug_assert_eq!(s.len(), 2);
        (s[0], s[1])
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// Constant or differentiable input owned by the graph. Must be 2-D.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        value.dims2()?;
        Ok(self.push(value, Op::Leaf))
    }

    /// Leaf that borrows a parameter's current value.
    pub fn param(&mut self, params: &'p ParamSet, id: ParamId) -> Result<Var> {
        let value = &params.get(id).value;
        value.dims2()?;
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Param(id),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Row gather from an embedding table parameter. Row 0 is the padding
    /// row: it is returned as-is but never receives gradient.
    pub fn gather(&mut self, params: &ParamSet, table: ParamId, ids: &[usize]) -> Result<Var> {
        let t = &params.get(table).value;
        let (rows, width) = t.dims2()?;
        if ids.is_empty() {
            return Err(Error::EmptyInput("gather"));
        }
        let mut out = Vec::with_capacity(ids.len() * width);
        for &id in ids {
            if id >= rows {
                return Err(Error::Index { index: id, size: rows });
            }
            out.extend_from_slice(t.row_slice(id));
        }
        let value = Tensor::matrix(ids.len(), width, out)?;
        Ok(self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let out = matmul_raw(self.data(a), self.data(b), m, k, n);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x - y).collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out: Vec<f64> = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::Mul(a, b)))
    }

    /// `x[r×c] + b[1×c]`, broadcasting the bias over rows.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (r, c) = self.dims(x);
        let (br, bc) = self.dims(b);
        if br != 1 || bc != c {
            return Err(Error::Shape {
                op: "add_row_bias",
                lhs: vec![r, c],
                rhs: vec![br, bc],
            });
        }
        let bias = self.data(b);
        let out: Vec<f64> = self
            .data(x)
            .chunks(c)
            .flat_map(|row| row.iter().zip(bias).map(|(x, b)| x + b))
            .collect();
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::AddRowBias(x, b)))
    }

    /// `x W + b` for `x[r×n]`, `W[n×m]`, `b[1×m]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row_bias(xw, b)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out: Vec<f64> = self.data(x).iter().map(|v| v * s).collect();
        let shape = self.value(x).shape().to_vec();
        self.push(Tensor { shape, data: out }, Op::Scale(x, s))
    }

    pub fn activation(&mut self, act: Activation, x: Var) -> Var {
        let out: Vec<f64> = self.data(x).iter().map(|&v| act.apply(v)).collect();
        let shape = self.value(x).shape().to_vec();
        self.push(Tensor { shape, data: out }, Op::Act(act, x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.activation(Activation::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.activation(Activation::Relu, x)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.dims(x);
        let mut out = self.data(x).to_vec();
        for row in out.chunks_mut(c) {
            softmax_in_place(row);
        }
        self.push(
            Tensor {
                shape: vec![r, c],
                data: out,
            },
            Op::SoftmaxRows(x),
        )
    }

    /// Softmax over the first `valid` entries of a `1 × T` row; the remaining
    /// entries are exactly zero.
    pub fn masked_softmax(&mut self, x: Var, valid: usize) -> Result<Var> {
        let (r, t) = self.dims(x);
        if r != 1 {
            return Err(Error::Shape {
                op: "masked_softmax",
                lhs: vec![r, t],
                rhs: vec![1, t],
            });
        }
        if valid == 0 {
            return Err(Error::EmptyInput("masked_softmax"));
        }
        if valid > t {
            return Err(Error::Index { index: valid, size: t });
        }
        let mut out = self.data(x).to_vec();
        softmax_in_place(&mut out[..valid]);
        out[valid..].iter_mut().for_each(|v| *v = 0.0);
        Ok(self.push(Tensor::row(out), Op::MaskedSoftmax(x, valid)))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let (r, c) = self.dims(x);
        let src = self.data(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        self.push(
            Tensor {
                shape: vec![c, r],
                data: out,
            },
            Op::Transpose(x),
        )
    }

    /// Valid (unpadded) 1-D convolution over time. Row `t` of the output is
    /// `flatten(input[t..t+k]) · filters + bias`.
    pub fn conv1d_windows(&mut self, input: Var, filters: Var, bias: Var, k: usize) -> Result<Var> {
        let (t_len, d) = self.dims(input);
        let (fr, f) = self.dims(filters);
        let (br, bc) = self.dims(bias);
        if k == 0 {
            return Err(Error::Config("convolution window must be >= 1".into()));
        }
        if fr != k * d {
            return Err(Error::Shape {
                op: "conv1d_windows",
                lhs: vec![t_len, d],
                rhs: vec![fr, f],
            });
        }
        if br != 1 || bc != f {
            return Err(Error::Shape {
                op: "conv1d_windows",
                lhs: vec![fr, f],
                rhs: vec![br, bc],
            });
        }
        if t_len < k {
            return Err(Error::SequenceTooShort { len: t_len, window: k });
        }
        let n_out = t_len - k + 1;
        let x = self.data(input);
        let w = self.data(filters);
        let b = self.data(bias);
        let mut out = Vec::with_capacity(n_out * f);
        for _ in 0..n_out {
            out.extend_from_slice(b);
        }
        for t in 0..n_out {
            let window = &x[t * d..(t + k) * d];
            let row = &mut out[t * f..(t + 1) * f];
            for (p, &xv) in window.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &w[p * f..(p + 1) * f];
                for (o, &wv) in row.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        }
        Ok(self.push(
            Tensor::matrix(n_out, f, out)?,
            Op::Conv1d {
                input,
                filters,
                bias,
                k,
            },
        ))
    }

    /// Column-wise maximum over rows. Ties resolve to the first row.
    pub fn max_over_time(&mut self, x: Var) -> Result<Var> {
        let (t, f) = self.dims(x);
        if t == 0 {
            return Err(Error::EmptyInput("max_over_time"));
        }
        let src = self.data(x);
        let mut best = src[..f].to_vec();
        let mut argmax = vec![0usize; f];
        for r in 1..t {
            for j in 0..f {
                let v = src[r * f + j];
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = r;
                }
            }
        }
        Ok(self.push(Tensor::row(best), Op::MaxOverTime { input: x, argmax }))
    }

    /// Inverted dropout. Identity in inference mode or at rate 0.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut RngState, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
            .collect();
        let out: Vec<f64> = self.data(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = self.value(x).shape().to_vec();
        Ok(self.push(Tensor { shape, data: out }, Op::Dropout { input: x, mask }))
    }

    /// Horizontal concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or(Error::EmptyInput("concat_cols"))?;
        let (r, _) = self.dims(first);
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let (rx, cx) = self.dims(x);
            if rx != r {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: vec![r],
                    rhs: vec![rx, cx],
                });
            }
            widths.push(cx);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&x, &w) in xs.iter().zip(&widths) {
                out.extend_from_slice(&self.data(x)[i * w..(i + 1) * w]);
            }
        }
        Ok(self.push(Tensor::matrix(r, total, out)?, Op::ConcatCols(xs.to_vec())))
    }

    /// Vertical concatenation of tensors with equal column counts.
    pub fn stack_rows(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or(Error::EmptyInput("stack_rows"))?;
        let (_, c) = self.dims(first);
        let mut rows = 0;
        let mut out = Vec::new();
        for &x in xs {
            let (rx, cx) = self.dims(x);
            if cx != c {
                return Err(Error::Shape {
                    op: "stack_rows",
                    lhs: vec![c],
                    rhs: vec![rx, cx],
                });
            }
            rows += rx;
            out.extend_from_slice(self.data(x));
        }
        Ok(self.push(Tensor::matrix(rows, c, out)?, Op::StackRows(xs.to_vec())))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start >= end || end > r {
            return Err(Error::Index { index: end, size: r });
        }
        let out = self.data(x)[start * c..end * c].to_vec();
        Ok(self.push(Tensor::matrix(end - start, c, out)?, Op::SliceRows { input: x, start }))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start >= end || end > c {
            return Err(Error::Index { index: end, size: c });
        }
        let out: Vec<f64> = self
            .data(x)
            .chunks(c)
            .flat_map(|row| row[start..end].iter().copied())
            .collect();
        Ok(self.push(Tensor::matrix(r, end - start, out)?, Op::SliceCols { input: x, start }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Column means: `[r×c] → [1×c]`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.dims(x);
        let mut out = vec![0.0; c];
        for row in self.data(x).chunks(c) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= r as f64);
        self.push(Tensor::row(out), Op::MeanRows(x))
    }

    /// Mean over all cells of the per-cell sigmoid cross-entropy
    /// `-[y log σ(z) + (1-y) log(1-σ(z))]`, evaluated as
    /// `max(z,0) - z·y + ln(1 + e^{-|z|})`.
    pub fn multilabel_cross_entropy(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let shape = self.value(logits).shape();
        if shape != targets.shape() {
            return Err(Error::Shape {
                op: "multilabel_cross_entropy",
                lhs: shape.to_vec(),
                rhs: targets.shape().to_vec(),
            });
        }
        if let Some(bad) = targets.data().iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::Validation(format!("non-binary target {bad}")));
        }
        let z = self.data(logits);
        let n = z.len() as f64;
        let total: f64 = z
            .iter()
            .zip(targets.data())
            .map(|(&z, &y)| bce_with_logit(z, y))
            .sum();
        Ok(self.push(
            Tensor::scalar(total / n),
            Op::Bce {
                logits,
                targets: targets.data().to_vec(),
            },
        ))
    }

    /// `lambda · Σ w²` over the given tensors.
    pub fn l2_penalty(&mut self, xs: &[Var], lambda: f64) -> Result<Var> {
        if lambda < 0.0 {
            return Err(Error::Config(format!("l2 lambda {lambda} < 0")));
        }
        let s: f64 = xs
            .iter()
            .map(|&x| self.data(x).iter().map(|w| w * w).sum::<f64>())
            .sum();
        Ok(self.push(
            Tensor::scalar(lambda * s),
            Op::SumSquares {
                inputs: xs.to_vec(),
                lambda,
            },
        ))
    }

    /// Propagates `∂root/∂node` to every node reachable from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::Shape {
                op: "backward (root must be scalar)",
                lhs: self.value(root).shape().to_vec(),
                rhs: vec![1, 1],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut params = ParamGrads::default();
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads, &mut params);
            grads[i] = Some(g);
        }
        Ok(Gradients { nodes: grads, params })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>], params: &mut ParamGrads) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => params.add_dense(*id, g),
            Op::Gather { table, ids } => {
                let w = node.value.shape()[1];
                for (r, &id) in ids.iter().enumerate() {
                    if id != 0 {
                        params.add_row(*table, id, &g[r * w..(r + 1) * w]);
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                let (av, bv) = (self.data(*a), self.data(*b));
                with_grad(grads, *a, m * k, |ga| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            ga[i * k + p] += dot(grow, brow);
                        }
                    }
                });
                with_grad(grads, *b, k * n, |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let a_ip = av[i * k + p];
                            if a_ip == 0.0 {
                                continue;
                            }
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += a_ip * gv;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                let n = g.len();
                with_grad(grads, *a, n, |ga| axpy(ga, g, 1.0));
                with_grad(grads, *b, n, |gb| axpy(gb, g, 1.0));
            }
            Op::Sub(a, b) => {
                let n = g.len();
                with_grad(grads, *a, n, |ga| axpy(ga, g, 1.0));
                with_grad(grads, *b, n, |gb| axpy(gb, g, -1.0));
            }
            Op::AddRowBias(x, b) => {
                let (_, c) = self.dims(*x);
                with_grad(grads, *x, g.len(), |gx| axpy(gx, g, 1.0));
                with_grad(grads, *b, c, |gb| {
                    for row in g.chunks(c) {
                        axpy(gb, row, 1.0);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.data(*a), self.data(*b));
                let n = g.len();
                with_grad(grads, *a, n, |ga| {
                    for j in 0..n {
                        ga[j] += g[j] * bv[j];
                    }
                });
                with_grad(grads, *b, n, |gb| {
                    for j in 0..n {
                        gb[j] += g[j] * av[j];
                    }
                });
            }
            Op::Scale(x, s) => with_grad(grads, *x, g.len(), |gx| axpy(gx, g, *s)),
            Op::Act(act, x) => {
                let y = node.value.data();
                with_grad(grads, *x, g.len(), |gx| {
                    for j in 0..g.len() {
                        gx[j] += g[j] * act.derivative_from_output(y[j]);
                    }
                });
            }
            Op::SoftmaxRows(x) => {
                let c = node.value.shape()[1];
                let y = node.value.data();
                with_grad(grads, *x, g.len(), |gx| {
                    for ((gxr, gr), yr) in gx.chunks_mut(c).zip(g.chunks(c)).zip(y.chunks(c)) {
                        softmax_backward(gxr, gr, yr);
                    }
                });
            }
            Op::MaskedSoftmax(x, valid) => {
                let y = node.value.data();
                let valid = *valid;
                with_grad(grads, *x, g.len(), |gx| {
                    softmax_backward(&mut gx[..valid], &g[..valid], &y[..valid]);
                });
            }
            Op::Transpose(x) => {
                let (r, c) = self.dims(*x);
                with_grad(grads, *x, r * c, |gx| {
                    for i in 0..r {
                        for j in 0..c {
                            gx[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Conv1d {
                input,
                filters,
                bias,
                k,
            } => {
                let (_, d) = self.dims(*input);
                let (_, f) = self.dims(*filters);
                let n_out = node.value.shape()[0];
                let (x, w) = (self.data(*input), self.data(*filters));
                let kd = k * d;
                with_grad(grads, *bias, f, |gb| {
                    for row in g.chunks(f) {
                        axpy(gb, row, 1.0);
                    }
                });
                with_grad(grads, *filters, kd * f, |gw| {
                    for t in 0..n_out {
                        let grow = &g[t * f..(t + 1) * f];
                        let window = &x[t * d..t * d + kd];
                        for (p, &xv) in window.iter().enumerate() {
                            if xv == 0.0 {
                                continue;
                            }
                            axpy(&mut gw[p * f..(p + 1) * f], grow, xv);
                        }
                    }
                });
                with_grad(grads, *input, x.len(), |gx| {
                    for t in 0..n_out {
                        let grow = &g[t * f..(t + 1) * f];
                        let gwin = &mut gx[t * d..t * d + kd];
                        for (p, slot) in gwin.iter_mut().enumerate() {
                            *slot += dot(&w[p * f..(p + 1) * f], grow);
                        }
                    }
                });
            }
            Op::MaxOverTime { input, argmax } => {
                let (t, f) = self.dims(*input);
                with_grad(grads, *input, t * f, |gx| {
                    for (j, &r) in argmax.iter().enumerate() {
                        gx[r * f + j] += g[j];
                    }
                });
            }
            Op::Dropout { input, mask } => with_grad(grads, *input, g.len(), |gx| {
                for j in 0..g.len() {
                    gx[j] += g[j] * mask[j];
                }
            }),
            Op::ConcatCols(xs) => {
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &x in xs {
                    let (r, w) = self.dims(x);
                    with_grad(grads, x, r * w, |gx| {
                        for i in 0..r {
                            let src = &g[i * total + offset..i * total + offset + w];
                            axpy(&mut gx[i * w..(i + 1) * w], src, 1.0);
                        }
                    });
                    offset += w;
                }
            }
            Op::StackRows(xs) => {
                let mut offset = 0;
                for &x in xs {
                    let n = self.value(x).len();
                    with_grad(grads, x, n, |gx| axpy(gx, &g[offset..offset + n], 1.0));
                    offset += n;
                }
            }
            Op::SliceRows { input, start } => {
                let (r, c) = self.dims(*input);
                let s = start * c;
                with_grad(grads, *input, r * c, |gx| axpy(&mut gx[s..s + g.len()], g, 1.0));
            }
            Op::SliceCols { input, start } => {
                let (r, c) = self.dims(*input);
                let w = node.value.shape()[1];
                with_grad(grads, *input, r * c, |gx| {
                    for i in 0..r {
                        let dst = &mut gx[i * c + start..i * c + start + w];
                        axpy(dst, &g[i * w..(i + 1) * w], 1.0);
                    }
                });
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                with_grad(grads, *x, n, |gx| gx.iter_mut().for_each(|v| *v += g[0]));
            }
            Op::MeanRows(x) => {
                let (r, c) = self.dims(*x);
                with_grad(grads, *x, r * c, |gx| {
                    for row in gx.chunks_mut(c) {
                        axpy(row, g, 1.0 / r as f64);
                    }
                });
            }
            Op::Bce { logits, targets } => {
                let z = self.data(*logits);
                let n = z.len() as f64;
                with_grad(grads, *logits, z.len(), |gz| {
                    for j in 0..z.len() {
                        gz[j] += g[0] * (sigmoid(z[j]) - targets[j]) / n;
                    }
                });
            }
            Op::SumSquares { inputs, lambda } => {
                for &x in inputs {
                    let xv = self.data(x);
                    with_grad(grads, x, xv.len(), |gx| axpy(gx, xv, 2.0 * lambda * g[0]));
                }
            }
        }
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: ParamGrads,
}

impl Gradients {
    /// Gradient with respect to a node, `None` if the root does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn params(&self) -> &ParamGrads {
        &self.params
    }

    pub fn into_params(self) -> ParamGrads {
        self.params
    }
}

fn with_grad(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

fn axpy(dst: &mut [f64], src: &[f64], a: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn softmax_backward(gx: &mut [f64], g: &[f64], y: &[f64]) {
    let s = dot(g, y);
    for j in 0..g.len() {
        gx[j] += y[j] * (g[j] - s);
    }
}

pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            axpy(crow, &b[p * n..(p + 1) * n], a_ip);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_and_dot() {
        let mut g = Graph::new();
        let i = g.leaf(t(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let x = g.leaf(t(&[&[3.0], &[4.0]])).unwrap();
        let y = g.matmul(i, x).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 4.0]);

        let a = g.leaf(t(&[&[1.0, 2.0]])).unwrap();
        let c = g.matmul(a, x).unwrap();
        assert_eq!(g.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::zeros(&[2, 3])).unwrap();
        let b = g.leaf(Tensor::zeros(&[2, 3])).unwrap();
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn activations_at_reference_points() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.apply(-2.5), 0.0);
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row(vec![0.0, 0.0, 0.0])).unwrap();
        let y = g.softmax_rows(x);
        for &v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let x = g.leaf(Tensor::row(vec![1000.0, 0.0])).unwrap();
        let y = g.softmax_rows(x);
        let d = g.value(y).data();
        assert!((d[0] - 1.0).abs() < 1e-12 && d[1] >= 0.0 && d[1] < 1e-300_f64.max(1e-200));
        assert!(g.value(y).is_finite());
    }

    #[test]
    fn conv_hand_computed() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[&[1.0], &[2.0], &[3.0]])).unwrap();
        let w = g.leaf(t(&[&[1.0], &[1.0]])).unwrap();
        let b = g.leaf(Tensor::row(vec![0.0])).unwrap();
        let y = g.conv1d_windows(x, w, b, 2).unwrap();
        assert_eq!(g.value(y).shape(), &[2, 1]);
        assert_eq!(g.value(y).data(), &[3.0, 5.0]);
    }

    #[test]
    fn conv_zero_filter_gives_bias_rows() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(4, 2, vec![0.3; 8]).unwrap()).unwrap();
        let w = g.leaf(Tensor::zeros(&[6, 2])).unwrap();
        let b = g.leaf(Tensor::row(vec![0.5, -1.0])).unwrap();
        let y = g.conv1d_windows(x, w, b, 3).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, -1.0, 0.5, -1.0]);
    }

    #[test]
    fn conv_rejects_short_sequence() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2, 1])).unwrap();
        let w = g.leaf(Tensor::zeros(&[3, 1])).unwrap();
        let b = g.leaf(Tensor::zeros(&[1, 1])).unwrap();
        assert!(matches!(
            g.conv1d_windows(x, w, b, 3),
            Err(Error::SequenceTooShort { len: 2, window: 3 })
        ));
    }

    #[test]
    fn max_over_time_and_tie_rule() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[&[1.0, 5.0], &[3.0, 2.0]])).unwrap();
        let m = g.max_over_time(x).unwrap();
        assert_eq!(g.value(m).data(), &[3.0, 5.0]);

        let single = g.leaf(t(&[&[4.0, -1.0]])).unwrap();
        let m1 = g.max_over_time(single).unwrap();
        assert_eq!(g.value(m1).data(), &[4.0, -1.0]);

        let tie = g.leaf(t(&[&[2.0, 0.0], &[2.0, 0.0]])).unwrap();
        let mt = g.max_over_time(tie).unwrap();
        assert_eq!(g.value(mt).data(), &[2.0, 0.0]);
        let s = g.sum(mt);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(tie).unwrap(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = RngState::new(1);
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(g.dropout(x, 0.0, &mut rng, true).unwrap(), x);
        assert_eq!(g.dropout(x, 0.7, &mut rng, false).unwrap(), x);
        assert!(matches!(g.dropout(x, 1.0, &mut rng, true), Err(Error::Config(_))));
        assert!(g.dropout(x, -0.1, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = RngState::new(99);
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row(vec![1.0; 10_000])).unwrap();
        let y = g.dropout(x, 0.5, &mut rng, true).unwrap();
        let mean = g.value(y).data().iter().sum::<f64>() / 10_000.0;
        assert!((0.95..=1.05).contains(&mean), "{mean}");
    }

    #[test]
    fn bce_reference_values() {
        let mut g = Graph::new();
        let z = g.leaf(Tensor::scalar(0.0)).unwrap();
        let l = g.multilabel_cross_entropy(z, &Tensor::scalar(1.0)).unwrap();
        assert!((g.value(l).data()[0] - std::f64::consts::LN_2).abs() < 1e-12);

        let z = g.leaf(Tensor::scalar(20.0)).unwrap();
        let l = g.multilabel_cross_entropy(z, &Tensor::scalar(1.0)).unwrap();
        assert!(g.value(l).data()[0] < 1e-8);

        let z = g.leaf(Tensor::scalar(-20.0)).unwrap();
        let l = g.multilabel_cross_entropy(z, &Tensor::scalar(1.0)).unwrap();
        let v = g.value(l).data()[0];
        assert!(v.is_finite() && (v - 20.0).abs() < 1e-6);
    }

    #[test]
    fn bce_rejects_non_binary_targets() {
        let mut g = Graph::new();
        let z = g.leaf(Tensor::row(vec![0.0, 0.0])).unwrap();
        let err = g.multilabel_cross_entropy(z, &Tensor::row(vec![1.0, 0.5]));
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn l2_reference_values() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::row(vec![3.0, 4.0])).unwrap();
        let p0 = g.l2_penalty(&[w], 0.0).unwrap();
        let p1 = g.l2_penalty(&[w], 1.0).unwrap();
        assert_eq!(g.value(p0).data(), &[0.0]);
        assert_eq!(g.value(p1).data(), &[25.0]);
    }

    #[test]
    fn backward_leaf_and_fan_out() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0)).unwrap();
        let grads = g.backward(x).unwrap();
        assert_eq!(grads.wrt(x).unwrap(), &[1.0]);

        let y = g.add(x, x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(x).unwrap(), &[2.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row(vec![1.0, 2.0])).unwrap();
        assert!(matches!(g.backward(x), Err(Error::Shape { .. })));
    }

    #[test]
    fn masked_softmax_zeroes_tail() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row(vec![0.3, -1.0, 5.0, 2.0])).unwrap();
        let y = g.masked_softmax(x, 2).unwrap();
        let d = g.value(y).data();
        assert_eq!(&d[2..], &[0.0, 0.0]);
        assert!((d[0] + d[1] - 1.0).abs() < 1e-12);
        assert!(g.masked_softmax(x, 0).is_err());
    }

    #[test]
    fn gather_skips_pad_gradient() {
        let mut ps = ParamSet::new();
        let e = ps
            .add(
                "emb",
                crate::tensor::ParamKind::Embedding,
                Tensor::matrix(3, 2, vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(),
            )
            .unwrap();
        let mut g = Graph::new();
        let x = g.gather(&ps, e, &[2, 0, 2]).unwrap();
        assert_eq!(g.value(x).data(), &[3.0, 4.0, 0.0, 0.0, 3.0, 4.0]);
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.params().dense(e, 6), vec![0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
        assert!(matches!(g.gather(&ps, e, &[3]), Err(Error::Index { .. })));
    }
}

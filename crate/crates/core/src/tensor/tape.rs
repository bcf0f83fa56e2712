//! Wengert-list reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. `backward`
//! replays the list in reverse, so node order is already a topological order.

use std::ops::Range;

use super::{Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise (or row-wise, for softmax) nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    LeakyRelu(f64),
    /// Softmax along the last axis, independently for each row.
    Softmax,
    Log,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Act(Var, Activation),
    Clamp(Var, f64, f64),
    AttentionPool {
        scores: Var,
        values: Var,
        segments: Vec<Range<usize>>,
    },
    ConcatCols(Var, Var),
    RepeatRows(Var),
    Row(Var, usize),
    BatchNorm(Var, f64),
    Sum(Var),
    RowSums(Var),
    Gather(Var, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// require gradients or is not reachable from the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

/// Per-column batch mean and `sqrt(var + eps)` with population variance.
fn column_stats(x: &Tensor, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (x.rows(), x.cols());
    let mut mean = vec![0.0; n];
    for r in 0..m {
        for (mu, v) in mean.iter_mut().zip(x.row_slice(r)) {
            *mu += v;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= m as f64);
    let mut var = vec![0.0; n];
    for r in 0..m {
        for ((s, v), mu) in var.iter_mut().zip(x.row_slice(r)).zip(&mean) {
            *s += (v - mu) * (v - mu);
        }
    }
    let std = var.iter().map(|s| (s / m as f64 + eps).sqrt()).collect();
    (mean, std)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
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

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable input: gradients are collected for it.
    pub fn param(&mut self, value: &Tensor) -> Var {
        self.leaf(value.clone(), true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Stop-gradient marker: same value, no gradient flows back through it.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2()?;
        let (k2, n) = tb.dims2()?;
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = Tensor::new(vec![m, n], matmul_raw(ta.data(), tb.data(), m, k, n))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    fn zip_same(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    /// `a + row`, broadcasting a `1 x n` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (ta, tr) = (self.value(a), self.value(row));
        let (m, n) = ta.dims2()?;
        if tr.dims2()? != (1, n) {
            return Err(mismatch("add_row", ta, tr));
        }
        let mut data = ta.data().to_vec();
        for r in 0..m {
            for (x, b) in data[r * n..(r + 1) * n].iter_mut().zip(tr.data()) {
                *x += b;
            }
        }
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddRow(a, row), &[a, row]))
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(a).map(|x| scale * x + shift);
        self.push(out, Op::Affine(a, scale), &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.affine(a, c, 0.0)
    }

    pub fn activation(&mut self, kind: Activation, a: Var) -> Var {
        let x = self.value(a);
        let out = match kind {
            Activation::Tanh => x.map(f64::tanh),
            Activation::Sigmoid => x.map(sigmoid),
            Activation::LeakyRelu(slope) => x.map(|v| if v > 0.0 { v } else { slope * v }),
            Activation::Log => {
                if let Some(bad) = x.data().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
                    panic!("log of non-positive value {bad}: inputs must be clamped first");
                }
                x.map(f64::ln)
            }
            Activation::Softmax => {
                let mut out = x.clone();
                let n = x.cols();
                for row in out.data_mut().chunks_mut(n) {
                    softmax_in_place(row);
                }
                out
            }
        };
        self.push(out, Op::Act(a, kind), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(Activation::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(Activation::Sigmoid, a)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.activation(Activation::LeakyRelu(slope), a)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.activation(Activation::Log, a)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        self.activation(Activation::Softmax, a)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping was active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(out, Op::Clamp(a, lo, hi), &[a])
    }

    /// Segmented softmax pooling.
    ///
    /// For every segment `s` of rows, the weights `softmax(scores[s])` combine
    /// `values[s]` into one output row. `scores` is `n x 1`, `values` is
    /// `n x e`, the result is `segments.len() x e`. An empty segment yields a
    /// zero row.
    pub fn attention_pool(
        &mut self,
        scores: Var,
        values: Var,
        segments: Vec<Range<usize>>,
    ) -> Result<Var, TensorError> {
        let (ts, tv) = (self.value(scores), self.value(values));
        let (n, one) = ts.dims2()?;
        let (nv, e) = tv.dims2()?;
        if one != 1 || n != nv {
            return Err(mismatch("attention_pool", ts, tv));
        }
        if let Some(bad) = segments.iter().find(|s| s.end > n || s.start > s.end) {
            return Err(TensorError::SegmentBounds {
                start: bad.start,
                end: bad.end,
                rows: n,
            });
        }
        let s_count = segments.len();
        if s_count == 0 {
            return Err(TensorError::EmptyDimension(vec![0, e]));
        }
        let mut out = vec![0.0; s_count * e];
        for (s, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                continue;
            }
            let mut w = ts.data()[seg.clone()].to_vec();
            softmax_in_place(&mut w);
            let dst = &mut out[s * e..(s + 1) * e];
            for (wi, r) in w.iter().zip(seg.clone()) {
                for (o, v) in dst.iter_mut().zip(tv.row_slice(r)) {
                    *o += wi * v;
                }
            }
        }
        let out = Tensor::new(vec![s_count, e], out)?;
        Ok(self.push(
            out,
            Op::AttentionPool {
                scores,
                values,
                segments,
            },
            &[scores, values],
        ))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, na) = ta.dims2()?;
        let (mb, nb) = tb.dims2()?;
        if m != mb {
            return Err(mismatch("concat_cols", ta, tb));
        }
        let mut data = Vec::with_capacity(m * (na + nb));
        for r in 0..m {
            data.extend_from_slice(ta.row_slice(r));
            data.extend_from_slice(tb.row_slice(r));
        }
        let out = Tensor::new(vec![m, na + nb], data)?;
        Ok(self.push(out, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Tiles a `1 x n` row into `m x n`.
    pub fn repeat_rows(&mut self, a: Var, m: usize) -> Result<Var, TensorError> {
        let ta = self.value(a);
        let (r, n) = ta.dims2()?;
        if r != 1 {
            return Err(TensorError::Rank(ta.shape().to_vec()));
        }
        let data = ta.data().repeat(m);
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::RepeatRows(a), &[a]))
    }

    /// Row `i` of a matrix, as `1 x n`.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var, TensorError> {
        let ta = self.value(a);
        let (m, _) = ta.dims2()?;
        if i >= m {
            return Err(TensorError::IndexOutOfRange { index: i, bound: m });
        }
        let out = Tensor::row(ta.row_slice(i).to_vec())?;
        Ok(self.push(out, Op::Row(a, i), &[a]))
    }

    /// Per-column standardization over the batch (rows) with population
    /// variance: `(x - mean) / sqrt(var + eps)`. No affine parameters.
    pub fn batch_norm(&mut self, a: Var, eps: f64) -> Result<Var, TensorError> {
        let ta = self.value(a);
        let (m, n) = ta.dims2()?;
        let (mean, std) = column_stats(ta, eps);
        let mut data = ta.data().to_vec();
        for r in 0..m {
            for c in 0..n {
                let x = &mut data[r * n + c];
                *x = (*x - mean[c]) / std[c];
            }
        }
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::BatchNorm(a, eps), &[a]))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `m x n` to `m x 1` by summing each row.
    pub fn row_sums(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = self.value(a);
        let (m, _) = ta.dims2()?;
        let data = (0..m).map(|r| ta.row_slice(r).iter().sum()).collect();
        let out = Tensor::new(vec![m, 1], data)?;
        Ok(self.push(out, Op::RowSums(a), &[a]))
    }

    /// Embedding lookup: rows `ids` of `table`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let tt = self.value(table);
        let (v, e) = tt.dims2()?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(TensorError::IndexOutOfRange { index: bad, bound: v });
        }
        let mut data = Vec::with_capacity(ids.len() * e);
        for &i in ids {
            data.extend_from_slice(tt.row_slice(i));
        }
        let out = Tensor::new(vec![ids.len(), e], data)?;
        Ok(self.push(out, Op::Gather(table, ids.to_vec()), &[table]))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::full(&[1], 1.0).reshape(lv.shape().to_vec())?);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: Var, g: Tensor) {
        if self.nodes[to.0].requires_grad {
            accumulate(&mut grads[to.0], g);
        }
    }

    fn propagate(
        &self,
        node: &Node,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<(), TensorError> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = ta.dims2()?;
                let (_, n) = tb.dims2()?;
                if self.requires_grad(*a) {
                    let bt = transpose_raw(tb.data(), k, n);
                    let da = matmul_raw(g.data(), &bt, m, n, k);
                    self.send(grads, *a, Tensor::new(ta.shape().to_vec(), da)?);
                }
                if self.requires_grad(*b) {
                    let at = transpose_raw(ta.data(), m, k);
                    let db = matmul_raw(&at, g.data(), k, m, n);
                    self.send(grads, *b, Tensor::new(tb.shape().to_vec(), db)?);
                }
            }
            Op::Add(a, b) => {
                self.send(grads, *a, g.clone());
                self.send(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.send(grads, *a, g.clone());
                self.send(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    let d = g.data().iter().zip(tb.data()).map(|(g, y)| g * y).collect();
                    self.send(grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
                }
                if self.requires_grad(*b) {
                    let d = g.data().iter().zip(ta.data()).map(|(g, x)| g * x).collect();
                    self.send(grads, *b, Tensor::new(tb.shape().to_vec(), d)?);
                }
            }
            Op::AddRow(a, row) => {
                self.send(grads, *a, g.clone());
                if self.requires_grad(*row) {
                    let tr = self.value(*row);
                    let n = tr.len();
                    let mut d = vec![0.0; n];
                    for chunk in g.data().chunks(n) {
                        for (acc, v) in d.iter_mut().zip(chunk) {
                            *acc += v;
                        }
                    }
                    self.send(grads, *row, Tensor::new(tr.shape().to_vec(), d)?);
                }
            }
            Op::Affine(a, scale) => {
                self.send(grads, *a, g.map(|x| x * scale));
            }
            Op::Act(a, kind) => {
                let x = self.value(*a);
                let d: Vec<f64> = match kind {
                    Activation::Tanh => {
                        g.data().iter().zip(y.data()).map(|(g, y)| g * (1.0 - y * y)).collect()
                    }
                    Activation::Sigmoid => {
                        g.data().iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y)).collect()
                    }
                    Activation::LeakyRelu(slope) => g
                        .data()
                        .iter()
                        .zip(x.data())
                        .map(|(g, x)| if *x > 0.0 { *g } else { g * slope })
                        .collect(),
                    Activation::Log => {
                        g.data().iter().zip(x.data()).map(|(g, x)| g / x).collect()
                    }
                    Activation::Softmax => {
                        let n = y.cols();
                        let mut d = Vec::with_capacity(y.len());
                        for (gr, yr) in g.data().chunks(n).zip(y.data().chunks(n)) {
                            let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                            d.extend(gr.iter().zip(yr).map(|(g, y)| y * (g - dot)));
                        }
                        d
                    }
                };
                self.send(grads, *a, Tensor::new(x.shape().to_vec(), d)?);
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a);
                let d = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(g, x)| if x < lo || x > hi { 0.0 } else { *g })
                    .collect();
                self.send(grads, *a, Tensor::new(x.shape().to_vec(), d)?);
            }
            Op::AttentionPool {
                scores,
                values,
                segments,
            } => {
                let (ts, tv) = (self.value(*scores), self.value(*values));
                let e = tv.cols();
                let mut ds = vec![0.0; ts.len()];
                let mut dv = vec![0.0; tv.len()];
                for (s, seg) in segments.iter().enumerate() {
                    if seg.is_empty() {
                        continue;
                    }
                    let gs = g.row_slice(s);
                    let pooled = y.row_slice(s);
                    let mut w = ts.data()[seg.clone()].to_vec();
                    softmax_in_place(&mut w);
                    let g_dot_pooled: f64 = gs.iter().zip(pooled).map(|(a, b)| a * b).sum();
                    for (wi, r) in w.iter().zip(seg.clone()) {
                        let vr = tv.row_slice(r);
                        let g_dot_v: f64 = gs.iter().zip(vr).map(|(a, b)| a * b).sum();
                        ds[r] = wi * (g_dot_v - g_dot_pooled);
                        for (d, gv) in dv[r * e..(r + 1) * e].iter_mut().zip(gs) {
                            *d += wi * gv;
                        }
                    }
                }
                if self.requires_grad(*scores) {
                    self.send(grads, *scores, Tensor::new(ts.shape().to_vec(), ds)?);
                }
                if self.requires_grad(*values) {
                    self.send(grads, *values, Tensor::new(tv.shape().to_vec(), dv)?);
                }
            }
            Op::ConcatCols(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, na) = ta.dims2()?;
                let nb = tb.cols();
                let mut da = Vec::with_capacity(m * na);
                let mut db = Vec::with_capacity(m * nb);
                for r in 0..m {
                    let gr = g.row_slice(r);
                    da.extend_from_slice(&gr[..na]);
                    db.extend_from_slice(&gr[na..]);
                }
                self.send(grads, *a, Tensor::new(ta.shape().to_vec(), da)?);
                self.send(grads, *b, Tensor::new(tb.shape().to_vec(), db)?);
            }
            Op::RepeatRows(a) => {
                let ta = self.value(*a);
                let n = ta.len();
                let mut d = vec![0.0; n];
                for chunk in g.data().chunks(n) {
                    for (acc, v) in d.iter_mut().zip(chunk) {
                        *acc += v;
                    }
                }
                self.send(grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
            }
            Op::Row(a, i) => {
                let ta = self.value(*a);
                let n = ta.cols();
                let mut d = vec![0.0; ta.len()];
                d[i * n..(i + 1) * n].copy_from_slice(g.data());
                self.send(grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
            }
            Op::BatchNorm(a, eps) => {
                let ta = self.value(*a);
                let (m, n) = ta.dims2()?;
                let (_, std) = column_stats(ta, *eps);
                let mf = m as f64;
                let mut d = vec![0.0; m * n];
                for c in 0..n {
                    let mut g_mean = 0.0;
                    let mut gy_mean = 0.0;
                    for r in 0..m {
                        let gv = g.at(r, c);
                        g_mean += gv;
                        gy_mean += gv * y.at(r, c);
                    }
                    g_mean /= mf;
                    gy_mean /= mf;
                    for r in 0..m {
                        d[r * n + c] = (g.at(r, c) - g_mean - y.at(r, c) * gy_mean) / std[c];
                    }
                }
                self.send(grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
            }
            Op::Sum(a) => {
                let ta = self.value(*a);
                self.send(grads, *a, Tensor::full(ta.shape(), g.item()));
            }
            Op::RowSums(a) => {
                let ta = self.value(*a);
                let (m, n) = ta.dims2()?;
                let mut d = Vec::with_capacity(m * n);
                for r in 0..m {
                    d.extend(std::iter::repeat_n(g.data()[r], n));
                }
                self.send(grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
            }
            Op::Gather(table, ids) => {
                let tt = self.value(*table);
                let e = tt.cols();
                let mut d = vec![0.0; tt.len()];
                for (k, &i) in ids.iter().enumerate() {
                    for (acc, v) in d[i * e..(i + 1) * e].iter_mut().zip(g.row_slice(k)) {
                        *acc += v;
                    }
                }
                self.send(grads, *table, Tensor::new(tt.shape().to_vec(), d)?);
            }
        }
        Ok(())
    }
}

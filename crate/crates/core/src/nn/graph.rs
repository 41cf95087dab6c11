//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every operation as a node holding its forward value.
//! Parameters are borrowed, not copied, so building a graph for a single
//! forward pass costs no more than the pass itself. [`Graph::backward`] walks
//! the tape in reverse and accumulates vector-Jacobian products only into
//! nodes that depend on a parameter.

use std::borrow::Cow;

use super::tensor::{matmul_acc, matmul_grad_a, matmul_grad_b, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    SumAll(Var),
    MeanAll(Var),
    SumCols(Var),
    Reshape(Var),
    ConcatCols(Var, Var),
    Depthwise(Var, Var, usize),
    Gather(Var, usize),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    gathers: Vec<Vec<usize>>,
}

/// Gradients of a scalar with respect to every node that required them.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `like`'s shape when `v` did not influence
    /// the loss.
    pub fn take_or_zeros(&mut self, v: Var, like: &Tensor) -> Tensor {
        self.grads
            .get_mut(v.0)
            .and_then(|g| g.take())
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn shape_err<T>(msg: String) -> Result<T> {
    Err(Error::Shape(msg))
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let rg = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    /// A differentiable leaf borrowing `t`.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// A differentiable leaf owning `t`.
    pub fn param_owned(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, true)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return shape_err(format!("matmul {:?} x {:?}", ta.shape(), tb.shape()));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        matmul_acc(ta.data(), tb.data(), &mut out, m, k, n);
        Ok(self.push_op(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), &[a, b]))
    }

    fn row_op(&mut self, a: Var, row: Var, mul: bool) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.shape().len() != 1 || ta.cols() != tr.len() {
            return shape_err(format!("row broadcast {:?} with {:?}", ta.shape(), tr.shape()));
        }
        let n = tr.len();
        let mut out = ta.data().to_vec();
        for chunk in out.chunks_exact_mut(n) {
            for (o, r) in chunk.iter_mut().zip(tr.data()) {
                if mul {
                    *o *= r;
                } else {
                    *o += r;
                }
            }
        }
        let shape = ta.shape().to_vec();
        let op = if mul { Op::MulRow(a, row) } else { Op::AddRow(a, row) };
        Ok(self.push_op(Tensor::new(shape, out)?, op, &[a, row]))
    }

    /// Adds a vector to every row (last axis) of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_op(a, row, false)
    }

    /// Multiplies every row (last axis) of `a` elementwise by a vector.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_op(a, row, true)
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return shape_err(format!("elementwise {:?} vs {:?}", ta.shape(), tb.shape()));
        }
        let out = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push_op(Tensor::new(shape, out)?, op, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Elementwise minimum. Ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Min(a, b), |x, y| if y < x { y } else { x })
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let ta = self.value(a);
        let out = ta.data().iter().map(|x| f(*x)).collect();
        let t = Tensor::new(ta.shape().to_vec(), out).expect("same shape");
        self.push_op(t, op, &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Offset(a), |x| x + c)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a), f64::exp)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square(a), |x| x * x)
    }

    /// Clamp with zero gradient outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push_op(Tensor::scalar(s), Op::SumAll(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push_op(Tensor::scalar(s), Op::MeanAll(a), &[a])
    }

    /// Sums the last axis: `[.., n] -> [..]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.cols();
        let out: Vec<f64> = t.data().chunks_exact(n).map(|c| c.iter().sum()).collect();
        let mut shape = t.shape().to_vec();
        shape.pop();
        if shape.is_empty() {
            shape.push(1);
        }
        self.push_op(Tensor::new(shape, out).expect("consistent"), Op::SumCols(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push_op(t, Op::Reshape(a), &[a]))
    }

    /// Concatenates two matrices along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[0] != tb.shape()[0] {
            return shape_err(format!("concat {:?} with {:?}", ta.shape(), tb.shape()));
        }
        let (m, na, nb) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = Vec::with_capacity(m * (na + nb));
        for i in 0..m {
            out.extend_from_slice(&ta.data()[i * na..(i + 1) * na]);
            out.extend_from_slice(&tb.data()[i * nb..(i + 1) * nb]);
        }
        Ok(self.push_op(Tensor::new(vec![m, na + nb], out)?, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Selects rows of a matrix by index; rows may repeat.
    pub fn gather_rows(&mut self, a: Var, index: Vec<usize>) -> Result<Var> {
        let ta = self.value(a);
        if ta.shape().len() != 2 {
            return shape_err(format!("gather from {:?}", ta.shape()));
        }
        let (m, n) = (ta.shape()[0], ta.shape()[1]);
        if let Some(bad) = index.iter().find(|&&i| i >= m) {
            return shape_err(format!("row {bad} out of {m}"));
        }
        let mut out = Vec::with_capacity(index.len() * n);
        for &i in &index {
            out.extend_from_slice(&ta.data()[i * n..(i + 1) * n]);
        }
        let t = Tensor::new(vec![index.len(), n], out)?;
        self.gathers.push(index);
        let slot = self.gathers.len() - 1;
        Ok(self.push_op(t, Op::Gather(a, slot), &[a]))
    }

    /// Depthwise 3×3 convolution over `[B, H, W, C]` with padding 1 and the
    /// given stride; the kernel has shape `[3, 3, C]`.
    pub fn depthwise_conv(&mut self, x: Var, kernel: Var, stride: usize) -> Result<Var> {
        let (tx, tk) = (self.value(x), self.value(kernel));
        if tx.shape().len() != 4 || tk.shape() != [3, 3, tx.shape()[3]] || stride == 0 {
            return shape_err(format!("depthwise {:?} with kernel {:?}", tx.shape(), tk.shape()));
        }
        let dims = ConvDims::new(tx.shape(), stride);
        let mut out = vec![0.0; dims.out_len()];
        dims.for_each_tap(|o, i, k| out[o] += tx.data()[i] * tk.data()[k]);
        let shape = vec![dims.b, dims.oh, dims.ow, dims.c];
        Ok(self.push_op(Tensor::new(shape, out)?, Op::Depthwise(x, kernel, stride), &[x, kernel]))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::NonScalarLoss(lt.len()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contribution: Tensor) {
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    /// Builds a gradient for `v` in place, starting from zeros.
    fn accumulate_with(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut [f64])) {
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.value(v).shape()));
        }
        f(slot.as_mut().expect("just filled").data_mut());
    }

    fn like(&self, v: Var, data: Vec<f64>) -> Tensor {
        Tensor::new(self.value(v).shape().to_vec(), data).expect("same size")
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[idx].value;
        let gd = g.data();
        match self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.wants(a) {
                    self.accumulate_with(grads, a, |da| matmul_grad_a(gd, tb.data(), da, m, k, n));
                }
                if self.wants(b) {
                    self.accumulate_with(grads, b, |db| matmul_grad_b(ta.data(), gd, db, m, k, n));
                }
            }
            Op::AddRow(a, row) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.clone());
                }
                if self.wants(row) {
                    let n = self.value(row).len();
                    self.accumulate_with(grads, row, |dr| {
                        for chunk in gd.chunks_exact(n) {
                            for (d, x) in dr.iter_mut().zip(chunk) {
                                *d += x;
                            }
                        }
                    });
                }
            }
            Op::MulRow(a, row) => {
                let (ta, tr) = (self.value(a), self.value(row));
                let n = tr.len();
                if self.wants(a) {
                    let mut d = gd.to_vec();
                    for chunk in d.chunks_exact_mut(n) {
                        for (x, r) in chunk.iter_mut().zip(tr.data()) {
                            *x *= r;
                        }
                    }
                    self.accumulate(grads, a, self.like(a, d));
                }
                if self.wants(row) {
                    self.accumulate_with(grads, row, |dr| {
                        for (gc, ac) in gd.chunks_exact(n).zip(ta.data().chunks_exact(n)) {
                            for j in 0..n {
                                dr[j] += gc[j] * ac[j];
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.clone());
                }
                if self.wants(b) {
                    self.accumulate(grads, b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.clone());
                }
                if self.wants(b) {
                    self.accumulate(grads, b, self.like(b, gd.iter().map(|x| -x).collect()));
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                if self.wants(a) {
                    let d = gd.iter().zip(tb.data()).map(|(g, y)| g * y).collect();
                    self.accumulate(grads, a, self.like(a, d));
                }
                if self.wants(b) {
                    let d = gd.iter().zip(ta.data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, b, self.like(b, d));
                }
            }
            Op::Min(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let pick_b: Vec<bool> = ta.data().iter().zip(tb.data()).map(|(x, y)| y < x).collect();
                if self.wants(a) {
                    let d = gd.iter().zip(&pick_b).map(|(g, &pb)| if pb { 0.0 } else { *g }).collect();
                    self.accumulate(grads, a, self.like(a, d));
                }
                if self.wants(b) {
                    let d = gd.iter().zip(&pick_b).map(|(g, &pb)| if pb { *g } else { 0.0 }).collect();
                    self.accumulate(grads, b, self.like(b, d));
                }
            }
            Op::Scale(a, c) => {
                let d = gd.iter().map(|x| x * c).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Offset(a) | Op::Reshape(a) => {
                self.accumulate(grads, a, self.like(a, gd.to_vec()));
            }
            Op::Tanh(a) => {
                let d = gd.iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y)).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Relu(a) => {
                let x = self.value(a);
                let d = gd.iter().zip(x.data()).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Exp(a) => {
                let d = gd.iter().zip(out.data()).map(|(g, y)| g * y).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Square(a) => {
                let x = self.value(a);
                let d = gd.iter().zip(x.data()).map(|(g, x)| g * 2.0 * x).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(a);
                let d = gd
                    .iter()
                    .zip(x.data())
                    .map(|(g, x)| if *x < lo || *x > hi { 0.0 } else { *g })
                    .collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::SumAll(a) => {
                let n = self.value(a).len();
                self.accumulate(grads, a, self.like(a, vec![gd[0]; n]));
            }
            Op::MeanAll(a) => {
                let n = self.value(a).len();
                self.accumulate(grads, a, self.like(a, vec![gd[0] / n as f64; n]));
            }
            Op::SumCols(a) => {
                let n = self.value(a).cols();
                let d = gd.iter().flat_map(|g| std::iter::repeat(*g).take(n)).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::ConcatCols(a, b) => {
                let (na, nb) = (self.value(a).cols(), self.value(b).cols());
                let rows: Vec<&[f64]> = gd.chunks_exact(na + nb).collect();
                if self.wants(a) {
                    let d = rows.iter().flat_map(|r| r[..na].iter().copied()).collect();
                    self.accumulate(grads, a, self.like(a, d));
                }
                if self.wants(b) {
                    let d = rows.iter().flat_map(|r| r[na..].iter().copied()).collect();
                    self.accumulate(grads, b, self.like(b, d));
                }
            }
            Op::Gather(a, slot) => {
                let n = self.value(a).cols();
                let index = &self.gathers[slot];
                self.accumulate_with(grads, a, |da| {
                    for (r, &i) in index.iter().enumerate() {
                        for j in 0..n {
                            da[i * n + j] += gd[r * n + j];
                        }
                    }
                });
            }
            Op::Depthwise(x, k, stride) => {
                let (tx, tk) = (self.value(x), self.value(k));
                let dims = ConvDims::new(tx.shape(), stride);
                if self.wants(x) {
                    self.accumulate_with(grads, x, |dx| {
                        dims.for_each_tap(|o, i, kk| dx[i] += gd[o] * tk.data()[kk]);
                    });
                }
                if self.wants(k) {
                    self.accumulate_with(grads, k, |dk| {
                        dims.for_each_tap(|o, i, kk| dk[kk] += gd[o] * tx.data()[i]);
                    });
                }
            }
        }
    }
}

/// Index arithmetic for the padded 3×3 depthwise convolution.
struct ConvDims {
    b: usize,
    h: usize,
    w: usize,
    c: usize,
    oh: usize,
    ow: usize,
    stride: usize,
}

impl ConvDims {
    fn new(shape: &[usize], stride: usize) -> Self {
        let (b, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
        ConvDims {
            b,
            h,
            w,
            c,
            oh: (h + 2 - 3) / stride + 1,
            ow: (w + 2 - 3) / stride + 1,
            stride,
        }
    }

    fn out_len(&self) -> usize {
        self.b * self.oh * self.ow * self.c
    }

    /// Calls `f(out_index, in_index, kernel_index)` for every in-bounds tap.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for bi in 0..self.b {
            for oy in 0..self.oh {
                for ky in 0..3 {
                    let iy = (oy * self.stride + ky) as isize - 1;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    for ox in 0..self.ow {
                        let obase = ((bi * self.oh + oy) * self.ow + ox) * self.c;
                        for kx in 0..3 {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix < 0 || ix >= self.w as isize {
                                continue;
                            }
                            let ibase = ((bi * self.h + iy as usize) * self.w + ix as usize) * self.c;
                            let kbase = (ky * 3 + kx) * self.c;
                            for ch in 0..self.c {
                                f(obase + ch, ibase + ch, kbase + ch);
                            }
                        }
                    }
                }
            }
        }
    }
}

//! Reverse-mode differentiation over a tape of dense tensor operations.
//!
//! A [`Tape`] is built fresh for every batch: the forward pass appends nodes,
//! [`Tape::backward`] walks them in reverse once, and the whole tape is then
//! dropped. Parameter leaves borrow their tensors so large heads are not copied.

use std::borrow::Cow;

use crate::error::{Error, Result};

use super::tensor::matmul;
use super::{Scalar, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply<S: Scalar>(self, v: S) -> S {
        match self {
            Activation::Sigmoid => S::one() / (S::one() + (-v).exp()),
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(S::zero()),
        }
    }
}

#[derive(Debug)]
enum Op<S> {
    Leaf,
    Affine { x: Var, w: Var, b: Option<Var> },
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Unary { x: Var, kind: Activation },
    Concat { parts: Vec<Var> },
    NormalizeRows { x: Var, norms: Vec<S> },
    SoftmaxXent { logits: Var, dlogits: Tensor<S> },
    SumSquares { x: Var },
}

struct Node<'a, S: Scalar> {
    value: Cow<'a, Tensor<S>>,
    op: Op<S>,
    requires_grad: bool,
}

pub struct Tape<'a, S: Scalar> {
    nodes: Vec<Node<'a, S>>,
}

impl<S: Scalar> Default for Tape<'_, S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, S: Scalar> Tape<'a, S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor<S>>, op: Op<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor<S>, op: Op<S>, parents: &[Var]) -> Result<Var> {
        value.ensure_finite("tape operation output")?;
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push(Cow::Owned(value), op, requires_grad))
    }

    /// Differentiable leaf borrowing a parameter tensor.
    pub fn param(&mut self, value: &'a Tensor<S>) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, true)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, value: &'a Tensor<S>) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<S> {
        &self.nodes[var.0].value
    }

    /// `x·w + b` with `x: m×k`, `w: k×p`, `b: p`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let mut out = matmul(self.value(x), false, self.value(w), false)?;
        if let Some(b) = b {
            let bias = self.value(b);
            let p = out.cols();
            if bias.len() != p {
                return Err(Error::shape(format!(
                    "bias of length {} for affine output width {p}",
                    bias.len()
                )));
            }
            let bias = bias.data().to_vec();
            for row in out.data_mut().chunks_mut(p) {
                for (o, &bj) in row.iter_mut().zip(&bias) {
                    *o += bj;
                }
            }
        }
        let parents: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        self.push_op(out, Op::Affine { x, w, b }, &parents)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = matmul(self.value(a), false, self.value(b), false)?;
        self.push_op(out, Op::MatMul { a, b }, &[a, b])
    }

    fn binary_shapes(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).same_shape(self.value(b)) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).dims(),
                self.value(b).dims()
            )))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes(a, b, "add")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push_op(out, Op::Add { a, b }, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes(a, b, "sub")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push_op(out, Op::Sub { a, b }, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes(a, b, "mul")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push_op(out, Op::Mul { a, b }, &[a, b])
    }

    pub fn elementwise(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let out = self.value(x).map(|v| kind.apply(v));
        self.push_op(out, Op::Unary { x, kind }, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.elementwise(x, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.elementwise(x, Activation::Tanh)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.elementwise(x, Activation::Relu)
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat of zero tensors"));
        };
        let rows = self.value(first).as_matrix()?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).as_matrix()?;
            if r != rows {
                return Err(Error::shape(format!("concat row mismatch: {r} vs {rows}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let out = Tensor::matrix(rows, total, out)?;
        self.push_op(
            out,
            Op::Concat {
                parts: parts.to_vec(),
            },
            parts,
        )
    }

    /// Scales every row to unit L2 norm.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x);
        let (rows, cols) = value.as_matrix()?;
        let mut out = value.data().to_vec();
        let mut norms = Vec::with_capacity(rows);
        for row in out.chunks_mut(cols) {
            let norm = row.iter().map(|&v| v * v).sum::<S>().sqrt();
            if norm <= S::of(1e-12) {
                return Err(Error::numeric("cannot normalize a zero row"));
            }
            for v in row.iter_mut() {
                *v /= norm;
            }
            norms.push(norm);
        }
        let out = Tensor::new(value.dims().to_vec(), out)?;
        self.push_op(out, Op::NormalizeRows { x, norms }, &[x])
    }

    /// Mean (optionally class-weighted) softmax cross-entropy; yields a 1-element tensor.
    pub fn softmax_xent(
        &mut self,
        logits: Var,
        labels: &[usize],
        weights: Option<&[S]>,
    ) -> Result<Var> {
        let (loss, dlogits) = softmax_xent(self.value(logits), labels, weights)?;
        self.push_op(
            Tensor::scalar(loss),
            Op::SoftmaxXent { logits, dlogits },
            &[logits],
        )
    }

    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).squared_norm());
        self.push_op(out, Op::SumSquares { x }, &[x])
    }

    /// Propagates d(output)/d(node) for every node, seeding `output` with 1.
    pub fn backward(&self, output: Var) -> Result<Adjoints<S>> {
        if self.value(output).len() != 1 {
            return Err(Error::shape("backward needs a scalar output"));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(self.value(output).dims(), S::one()));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
        }
        Ok(Adjoints { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(
        &self,
        node: &Node<'a, S>,
        g: &Tensor<S>,
        grads: &mut [Option<Tensor<S>>],
    ) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                self.matmul_backward(*x, *w, g, grads)?;
                if let Some(b) = b.filter(|&b| self.wants(b)) {
                    let p = g.cols();
                    let mut db = vec![S::zero(); p];
                    for row in g.data().chunks(p) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let dims = self.value(b).dims().to_vec();
                    accumulate(grads, b, Tensor::new(dims, db)?);
                }
            }
            Op::MatMul { a, b } => self.matmul_backward(*a, *b, g, grads)?,
            Op::Add { a, b } => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub { a, b } => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.map(|v| -v));
                }
            }
            Op::Mul { a, b } => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.zip_map(self.value(*b), |d, y| d * y));
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.zip_map(self.value(*a), |d, x| d * x));
                }
            }
            Op::Unary { x, kind } => {
                let y = &node.value;
                let dx = match kind {
                    Activation::Sigmoid => g.zip_map(y, |d, s| d * s * (S::one() - s)),
                    Activation::Tanh => g.zip_map(y, |d, t| d * (S::one() - t * t)),
                    Activation::Relu => g.zip_map(y, |d, r| if r > S::zero() { d } else { S::zero() }),
                };
                accumulate(grads, *x, dx);
            }
            Op::Concat { parts } => {
                let (rows, total) = g.as_matrix()?;
                let mut offset = 0;
                for &p in parts {
                    let (_, w) = self.value(p).as_matrix()?;
                    if self.wants(p) {
                        let mut part = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            let start = i * total + offset;
                            part.extend_from_slice(&g.data()[start..start + w]);
                        }
                        let dims = self.value(p).dims().to_vec();
                        accumulate(grads, p, Tensor::new(dims, part)?);
                    }
                    offset += w;
                }
            }
            Op::NormalizeRows { x, norms } => {
                let y = &node.value;
                let cols = y.cols();
                let mut dx = g.data().to_vec();
                for ((drow, yrow), &norm) in dx.chunks_mut(cols).zip(y.data().chunks(cols)).zip(norms) {
                    let dot: S = drow.iter().zip(yrow).map(|(&d, &v)| d * v).sum();
                    for (d, &v) in drow.iter_mut().zip(yrow) {
                        *d = (*d - v * dot) / norm;
                    }
                }
                accumulate(grads, *x, Tensor::new(y.dims().to_vec(), dx)?);
            }
            Op::SoftmaxXent { logits, dlogits } => {
                let upstream = g.data()[0];
                accumulate(grads, *logits, dlogits.map(|v| v * upstream));
            }
            Op::SumSquares { x } => {
                let upstream = g.data()[0];
                let two = S::of(2.0);
                accumulate(grads, *x, self.value(*x).map(|v| two * v * upstream));
            }
        }
        Ok(())
    }

    fn matmul_backward(
        &self,
        x: Var,
        w: Var,
        g: &Tensor<S>,
        grads: &mut [Option<Tensor<S>>],
    ) -> Result<()> {
        if self.wants(x) {
            let dx = matmul(g, false, self.value(w), true)?;
            let dims = self.value(x).dims().to_vec();
            accumulate(grads, x, dx.reshaped(dims)?);
        }
        if self.wants(w) {
            let dw = matmul(self.value(x), true, g, false)?;
            let dims = self.value(w).dims().to_vec();
            accumulate(grads, w, dw.reshaped(dims)?);
        }
        Ok(())
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], v: Var, g: Tensor<S>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Result of a backward pass; indexed by [`Var`].
pub struct Adjoints<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Adjoints<S> {
    /// Gradient of a leaf, or `None` when the output did not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<S>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

/// Lower clamp applied to the target-class probability inside the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Mean softmax cross-entropy of `logits: m×C` against class indices, with
/// optional per-class weights, and its exact gradient with respect to the logits.
pub fn softmax_xent<S: Scalar>(
    logits: &Tensor<S>,
    labels: &[usize],
    weights: Option<&[S]>,
) -> Result<(S, Tensor<S>)> {
    let (m, c) = logits.as_matrix()?;
    if labels.len() != m {
        return Err(Error::shape(format!(
            "{} labels for {m} logit rows",
            labels.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != c {
            return Err(Error::shape(format!("{} class weights for {c} classes", w.len())));
        }
    }
    let max_loss = -S::of(LOG_CLAMP).ln();
    let inv_m = S::one() / S::of(m as f64);
    let mut total = S::zero();
    let mut dlogits = Vec::with_capacity(m * c);
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::input(format!("label {y} outside [0, {c})")));
        }
        let row = &logits.data()[i * c..(i + 1) * c];
        let (argmax, max) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, S::neg_infinity()), |best, (j, v)| if v > best.1 { (j, v) } else { best });
        // The max entry contributes exactly 1 to the partition sum.
        let rest: S = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != argmax)
            .map(|(_, &v)| (v - max).exp())
            .sum();
        let log_partition = rest.ln_1p();
        let weight = weights.map_or(S::one(), |w| w[y]);
        let raw = log_partition - (row[y] - max);
        let clamped = raw > max_loss;
        total += weight * raw.min(max_loss);
        let partition = S::one() + rest;
        for (j, &v) in row.iter().enumerate() {
            let d = if clamped {
                S::zero()
            } else {
                let p = (v - max).exp() / partition;
                let target = if j == y { S::one() } else { S::zero() };
                weight * (p - target) * inv_m
            };
            dlogits.push(d);
        }
    }
    let loss = total * inv_m;
    Ok((loss, Tensor::new(logits.dims().to_vec(), dlogits)?))
}

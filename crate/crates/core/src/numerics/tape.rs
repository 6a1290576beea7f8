use std::borrow::Cow;

use super::kernels::{self, ConvGeom};
use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf { tag: Option<usize> },
    Conv2d { x: Var, w: Var, b: Var, geom: ConvGeom, cols: Vec<T> },
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    LayerNorm { x: Var, gamma: Var, beta: Var, means: Vec<T>, rstds: Vec<T> },
    Gelu(Var),
    Relu(Var),
    Softmax { x: Var, axis: usize },
    Attention { q: Var, k: Var, v: Var, heads: usize, bias: Option<Var>, probs: Vec<T> },
    PixelShuffle { x: Var, r: usize },
    GatherRows { x: Var, idx: Vec<usize> },
    GatherFlat { x: Var, idx: Vec<usize> },
    SliceRows { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
    Sum(Var),
    Mean(Var),
    L1 { pred: Var, target: Var },
}

struct Node<'a, T: Element> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Recording tape for reverse-mode differentiation.
///
/// Leaves may borrow their tensors (parameters are not copied onto the tape).
/// One graph per step; it is not shared between threads.
pub struct Graph<'a, T: Element = f32> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Element> Default for Graph<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    tags: Vec<(usize, usize)>,
}

impl<T: Element> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients of tagged leaves as `(tag, grad)`, in recording order.
    pub fn tagged(&self) -> impl Iterator<Item = (usize, &Tensor<T>)> {
        self.tags
            .iter()
            .filter_map(|&(node, tag)| self.grads[node].as_ref().map(|g| (tag, g)))
    }

    pub fn into_tagged(mut self) -> Vec<(usize, Tensor<T>)> {
        let tags = std::mem::take(&mut self.tags);
        tags.into_iter()
            .filter_map(|(node, tag)| self.grads[node].take().map(|g| (tag, g)))
            .collect()
    }
}

impl<'a, T: Element> Graph<'a, T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Cow<'a, Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    /// A differentiable input owned by the tape.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Leaf { tag: None }, true)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Leaf { tag: None }, false)
    }

    /// A borrowed, differentiable leaf whose gradient is reported under `tag`.
    pub fn param(&mut self, t: &'a Tensor<T>, tag: usize) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf { tag: Some(tag) }, true)
    }

    /// A borrowed leaf excluded from differentiation.
    pub fn frozen(&mut self, t: &'a Tensor<T>) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf { tag: None }, false)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (out, geom, cols) =
            kernels::conv2d_with_cols(self.value(x), self.value(w), self.value(b), stride, pad)?;
        Ok(self.derived(out, Op::Conv2d { x, w, b, geom, cols }, &[x, w, b]))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let out = kernels::linear(self.value(x), self.value(w), self.value(b))?;
        Ok(self.derived(out, Op::Linear { x, w, b }, &[x, w, b]))
    }

    fn same_dims(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).dims() != self.value(b).dims() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.value(a).dims(), self.value(b).dims()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_dims("add", a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p + q).collect();
        let out = Tensor::new(x.dims(), data)?;
        Ok(self.derived(out, Op::Add(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_dims("mul", a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p * q).collect();
        let out = Tensor::new(x.dims(), data)?;
        Ok(self.derived(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.derived(out, Op::Scale(a, s), &[a])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (out, means, rstds) =
            kernels::layer_norm_full(self.value(x), self.value(gamma), self.value(beta), eps)?;
        Ok(self.derived(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                means,
                rstds,
            },
            &[x, gamma, beta],
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let out = kernels::gelu(self.value(x));
        self.derived(out, Op::Gelu(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = kernels::relu(self.value(x));
        self.derived(out, Op::Relu(x), &[x])
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = kernels::softmax(self.value(x), axis)?;
        Ok(self.derived(out, Op::Softmax { x, axis }, &[x]))
    }

    /// Multi-head attention; `bias` is a differentiable `[heads,Nq,Nk]` term,
    /// `mask` a constant `[Nq,Nk]` additive mask.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        bias: Option<Var>,
        mask: Option<&Tensor<T>>,
    ) -> Result<Var> {
        let a = kernels::attention_full(
            self.value(q),
            self.value(k),
            self.value(v),
            heads,
            bias.map(|b| self.value(b)),
            mask,
        )?;
        let mut inputs = vec![q, k, v];
        inputs.extend(bias);
        Ok(self.derived(
            a.out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                bias,
                probs: a.probs,
            },
            &inputs,
        ))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let out = kernels::pixel_shuffle(self.value(x), r)?;
        Ok(self.derived(out, Op::PixelShuffle { x, r }, &[x]))
    }

    /// Rows of a `[N, D]` tensor selected by `idx` (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, idx: Vec<usize>) -> Result<Var> {
        let t = self.value(x);
        if t.dims().len() != 2 || idx.is_empty() || idx.iter().any(|&i| i >= t.dims()[0]) {
            return Err(Error::shape("gather_rows", format!("{:?} with {} indices", t.dims(), idx.len())));
        }
        let d = t.dims()[1];
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in &idx {
            data.extend_from_slice(&t.data()[i * d..(i + 1) * d]);
        }
        let out = Tensor::new([idx.len(), d], data)?;
        Ok(self.derived(out, Op::GatherRows { x, idx }, &[x]))
    }

    /// Flat elements of `x` selected by `idx`, shaped as `dims`.
    pub fn gather_flat(&mut self, x: Var, idx: Vec<usize>, dims: Vec<usize>) -> Result<Var> {
        let t = self.value(x);
        if idx.iter().any(|&i| i >= t.len()) {
            return Err(Error::shape("gather_flat", "index out of range"));
        }
        let data = idx.iter().map(|&i| t.data()[i]).collect();
        let out = Tensor::new(dims, data)?;
        Ok(self.derived(out, Op::GatherFlat { x, idx }, &[x]))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        if t.dims().len() != 2 || len == 0 || start + len > t.dims()[0] {
            return Err(Error::shape("slice_rows", format!("{:?} rows {start}..{}", t.dims(), start + len)));
        }
        let d = t.dims()[1];
        let out = Tensor::new([len, d], t.data()[start * d..(start + len) * d].to_vec())?;
        Ok(self.derived(out, Op::SliceRows { x, start }, &[x]))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::shape("concat_rows", "no inputs"))?;
        let d = self.value(*first).dims()[1];
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.dims().len() != 2 || t.dims()[1] != d {
                return Err(Error::shape("concat_rows", format!("{:?} vs width {d}", t.dims())));
            }
            rows += t.dims()[0];
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new([rows, d], data)?;
        Ok(self.derived(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn reshape(&mut self, x: Var, dims: impl Into<Vec<usize>>) -> Result<Var> {
        let out = self.value(x).clone().reshape(dims)?;
        Ok(self.derived(out, Op::Reshape(x), &[x]))
    }

    /// Transpose of a 2D tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.dims().len() != 2 {
            return Err(Error::shape("transpose", format!("{:?}", t.dims())));
        }
        let out = transpose2(t.data(), t.dims()[0], t.dims()[1]);
        let out = Tensor::new([t.dims()[1], t.dims()[0]], out)?;
        Ok(self.derived(out, Op::Transpose(x), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        self.derived(out, Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::scalar(t.sum() / T::of(t.len() as f64));
        self.derived(out, Op::Mean(x), &[x])
    }

    /// Mean absolute difference.
    pub fn l1(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_dims("l1_loss", pred, target)?;
        let (p, t) = (self.value(pred), self.value(target));
        let mut acc = T::zero();
        for (&a, &b) in p.data().iter().zip(t.data()) {
            acc += (a - b).abs();
        }
        let out = Tensor::scalar(acc / T::of(p.len() as f64));
        Ok(self.derived(out, Op::L1 { pred, target }, &[pred, target]))
    }

    /// Reverse pass from a scalar `loss`. Nodes are visited in exactly the
    /// reverse of their recording order.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", self.value(loss).dims())));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).dims(), T::one()));
        let mut tags = Vec::new();
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if let Op::Leaf { tag: Some(tag) } = node.op {
                tags.push((i, tag));
            }
            if !node.requires_grad || matches!(node.op, Op::Leaf { .. }) {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.propagate(node, gy, &mut grads)?;
        }
        tags.reverse();
        Ok(Gradients { grads, tags })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, data: Vec<T>) {
        if !self.needs(v) {
            return;
        }
        let dims = self.value(v).dims();
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        match &mut grads[v.0] {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(data) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(Tensor::new(dims, data).expect("gradient dims match value")),
        }
    }

    fn propagate(&self, node: &Node<'a, T>, gy: Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let dy = gy.data();
        match &node.op {
            Op::Leaf { .. } => {}
            Op::Conv2d { x, w, b, geom, cols } => {
                let (dx, dw, db) = kernels::conv2d_backward(dy, self.value(*w).data(), cols, geom);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Op::Linear { x, w, b } => {
                let (xt, wt) = (self.value(*x), self.value(*w));
                let (n, din, dout) = (xt.dims()[0], xt.dims()[1], wt.dims()[0]);
                if self.needs(*x) {
                    let mut dx = vec![T::zero(); n * din];
                    kernels::gemm(dy, false, wt.data(), false, &mut dx, n, dout, din, false);
                    self.accumulate(grads, *x, dx);
                }
                if self.needs(*w) {
                    let mut dw = vec![T::zero(); dout * din];
                    kernels::gemm(dy, true, xt.data(), false, &mut dw, dout, n, din, false);
                    self.accumulate(grads, *w, dw);
                }
                if self.needs(*b) {
                    let mut db = vec![T::zero(); dout];
                    for row in dy.chunks(dout) {
                        for (a, &g) in db.iter_mut().zip(row) {
                            *a += g;
                        }
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, dy.to_vec());
                self.accumulate(grads, *b, dy.to_vec());
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, dy.iter().zip(y).map(|(&g, &v)| g * v).collect());
                self.accumulate(grads, *b, dy.iter().zip(x).map(|(&g, &v)| g * v).collect());
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, dy.iter().map(|&g| g * *s).collect()),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                means,
                rstds,
            } => {
                let (dx, dg, db) = kernels::layer_norm_backward(
                    dy,
                    self.value(*x).data(),
                    self.value(*gamma).data(),
                    means,
                    rstds,
                );
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gamma, dg);
                self.accumulate(grads, *beta, db);
            }
            Op::Gelu(x) => {
                let xs = self.value(*x).data();
                let dx = dy
                    .iter()
                    .zip(xs)
                    .map(|(&g, &v)| g * T::of(kernels::gelu_grad(v.as_f64())))
                    .collect();
                self.accumulate(grads, *x, dx);
            }
            Op::Relu(x) => {
                let xs = self.value(*x).data();
                let dx = dy
                    .iter()
                    .zip(xs)
                    .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                self.accumulate(grads, *x, dx);
            }
            Op::Softmax { x, axis } => {
                let dx = kernels::softmax_backward(dy, node.value.data(), node.value.dims(), *axis);
                self.accumulate(grads, *x, dx);
            }
            Op::Attention {
                q,
                k,
                v,
                heads,
                bias,
                probs,
            } => {
                let g = kernels::attention_backward(
                    dy,
                    self.value(*q),
                    self.value(*k),
                    self.value(*v),
                    *heads,
                    probs,
                );
                self.accumulate(grads, *q, g.dq);
                self.accumulate(grads, *k, g.dk);
                self.accumulate(grads, *v, g.dv);
                if let Some(b) = bias {
                    self.accumulate(grads, *b, g.dlogits);
                }
            }
            Op::PixelShuffle { x, r } => {
                let d = self.value(*x).dims();
                let mut dx = vec![T::zero(); dy.len()];
                kernels::shuffle_indices(d[0] / (r * r), d[1], d[2], *r, |src, dst| dx[src] = dy[dst]);
                self.accumulate(grads, *x, dx);
            }
            Op::GatherRows { x, idx } => {
                let t = self.value(*x);
                let d = t.dims()[1];
                let mut dx = vec![T::zero(); t.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..d {
                        dx[i * d + c] += dy[r * d + c];
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::GatherFlat { x, idx } => {
                let mut dx = vec![T::zero(); self.value(*x).len()];
                for (&i, &g) in idx.iter().zip(dy) {
                    dx[i] += g;
                }
                self.accumulate(grads, *x, dx);
            }
            Op::SliceRows { x, start } => {
                let t = self.value(*x);
                let d = t.dims()[1];
                let mut dx = vec![T::zero(); t.len()];
                dx[start * d..start * d + dy.len()].copy_from_slice(dy);
                self.accumulate(grads, *x, dx);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    self.accumulate(grads, p, dy[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::Reshape(x) => self.accumulate(grads, *x, dy.to_vec()),
            Op::Transpose(x) => {
                let d = node.value.dims();
                self.accumulate(grads, *x, transpose2(dy, d[0], d[1]));
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                self.accumulate(grads, *x, vec![dy[0]; n]);
            }
            Op::Mean(x) => {
                let n = self.value(*x).len();
                self.accumulate(grads, *x, vec![dy[0] / T::of(n as f64); n]);
            }
            Op::L1 { pred, target } => {
                let (p, t) = (self.value(*pred).data(), self.value(*target).data());
                let s = dy[0] / T::of(p.len() as f64);
                let sign: Vec<T> = p
                    .iter()
                    .zip(t)
                    .map(|(&a, &b)| {
                        if a > b {
                            s
                        } else if a < b {
                            -s
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                if self.needs(*target) {
                    self.accumulate(grads, *target, sign.iter().map(|&v| -v).collect());
                }
                self.accumulate(grads, *pred, sign);
            }
        }
        Ok(())
    }
}

fn transpose2<T: Element>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

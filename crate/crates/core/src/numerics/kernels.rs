//! Forward and backward kernels on plain tensors.
//!
//! These are the building blocks recorded by [`Graph`](super::Graph); they
//! are also usable directly for inference-only code paths.

use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Additive bias standing in for minus infinity in attention masks.
pub const MASKED: f64 = -1e9;

/// `c (+)= op(a) · op(b)` where `op` optionally transposes.
///
/// `a` is `[m,k]` (or `[k,m]` when `ta`), `b` is `[k,n]` (or `[n,k]` when
/// `tb`), `c` is `[m,n]`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Element>(
    a: &[T],
    ta: bool,
    b: &[T],
    tb: bool,
    c: &mut [T],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    if k == 0 {
        if !accumulate {
            c[..m * n].iter_mut().for_each(|x| *x = T::zero());
        }
        return;
    }
    // SAFETY: the asserts above bound every access made with these strides.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a square-kernel 2D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl ConvGeom {
    pub fn new<T: Element>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, stride: usize, pad: usize) -> Result<Self> {
        let (xd, wd) = (x.dims(), w.dims());
        if xd.len() != 3 {
            return Err(Error::shape("conv2d", format!("input must be [C,H,W], got {xd:?}")));
        }
        if wd.len() != 4 || wd[2] != wd[3] {
            return Err(Error::shape("conv2d", format!("weight must be [O,C,k,k], got {wd:?}")));
        }
        if wd[1] != xd[0] {
            return Err(Error::shape(
                "conv2d",
                format!("weight expects {} input channels, input has {}", wd[1], xd[0]),
            ));
        }
        if b.dims() != [wd[0]] {
            return Err(Error::shape("conv2d", format!("bias dims {:?} != [{}]", b.dims(), wd[0])));
        }
        if stride == 0 {
            return Err(Error::Invalid("conv2d stride must be >= 1".into()));
        }
        let k = wd[2];
        if xd[1] + 2 * pad < k || xd[2] + 2 * pad < k {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {k} larger than padded input {xd:?} (pad {pad})"),
            ));
        }
        Ok(ConvGeom {
            channels: xd[0],
            height: xd[1],
            width: xd[2],
            out_channels: wd[0],
            kernel: k,
            stride,
            pad,
            out_height: (xd[1] + 2 * pad - k) / stride + 1,
            out_width: (xd[2] + 2 * pad - k) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn out_len(&self) -> usize {
        self.out_height * self.out_width
    }
}

/// Output columns `ox` whose input column `ox·s + kx − p` lies inside `[0, w)`.
fn valid_range(out: usize, inp: usize, k_off: usize, s: usize, p: usize) -> (usize, usize) {
    // first ox with ox·s + k_off >= p
    let lo = if k_off >= p { 0 } else { (p - k_off).div_ceil(s) };
    // last ox with ox·s + k_off − p <= inp − 1
    let hi = if inp + p < k_off + 1 { 0 } else { ((inp + p - 1 - k_off) / s + 1).min(out) };
    (lo.min(hi), hi)
}

fn im2col<T: Element>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let (k, s, p) = (g.kernel, g.stride, g.pad);
    let (oh, ow) = (g.out_height, g.out_width);
    let mut cols = vec![T::zero(); g.patch_len() * g.out_len()];
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            let (y0, y1) = valid_range(oh, g.height, ky, s, p);
            for kx in 0..k {
                let (x0, x1) = valid_range(ow, g.width, kx, s, p);
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in y0..y1 {
                    let iy = oy * s + ky - p;
                    let src = &plane[iy * g.width..(iy + 1) * g.width];
                    let out_row = &mut dst[oy * ow + x0..oy * ow + x1];
                    if s == 1 {
                        let ix0 = x0 + kx - p;
                        out_row.copy_from_slice(&src[ix0..ix0 + (x1 - x0)]);
                    } else {
                        for (j, o) in out_row.iter_mut().enumerate() {
                            *o = src[(x0 + j) * s + kx - p];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Element>(cols: &[T], g: &ConvGeom) -> Vec<T> {
    let (k, s, p) = (g.kernel, g.stride, g.pad);
    let (oh, ow) = (g.out_height, g.out_width);
    let mut x = vec![T::zero(); g.channels * g.height * g.width];
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            let (y0, y1) = valid_range(oh, g.height, ky, s, p);
            for kx in 0..k {
                let (x0, x1) = valid_range(ow, g.width, kx, s, p);
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in y0..y1 {
                    let iy = oy * s + ky - p;
                    let dst = &mut plane[iy * g.width..(iy + 1) * g.width];
                    let src_row = &src[oy * ow + x0..oy * ow + x1];
                    if s == 1 {
                        let ix0 = x0 + kx - p;
                        for (d, &v) in dst[ix0..ix0 + (x1 - x0)].iter_mut().zip(src_row) {
                            *d += v;
                        }
                    } else {
                        for (j, &v) in src_row.iter().enumerate() {
                            dst[(x0 + j) * s + kx - p] += v;
                        }
                    }
                }
            }
        }
    }
    x
}

/// Convolution returning the unfolded input patches needed by the backward pass.
pub(crate) fn conv2d_with_cols<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, ConvGeom, Vec<T>)> {
    let g = ConvGeom::new(x, w, b, stride, pad)?;
    let cols = im2col(x.data(), &g);
    let n = g.out_len();
    let mut out = vec![T::zero(); g.out_channels * n];
    for (o, row) in out.chunks_mut(n).enumerate() {
        row.iter_mut().for_each(|v| *v = b.data()[o]);
    }
    gemm(w.data(), false, &cols, false, &mut out, g.out_channels, g.patch_len(), n, true);
    let out = Tensor::new([g.out_channels, g.out_height, g.out_width], out)?;
    Ok((out, g, cols))
}

/// 2D cross-correlation with zero padding. `x: [C,H,W]`, `w: [O,C,k,k]`, `b: [O]`.
pub fn conv2d<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    conv2d_with_cols(x, w, b, stride, pad).map(|(out, _, _)| out)
}

/// Gradients of a convolution with respect to input, weight and bias.
pub(crate) fn conv2d_backward<T: Element>(
    dy: &[T],
    w: &[T],
    cols: &[T],
    g: &ConvGeom,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = g.out_len();
    let kk = g.patch_len();
    let mut dw = vec![T::zero(); g.out_channels * kk];
    gemm(dy, false, cols, true, &mut dw, g.out_channels, n, kk, false);
    let mut dcols = vec![T::zero(); kk * n];
    gemm(w, true, dy, false, &mut dcols, kk, g.out_channels, n, false);
    let dx = col2im(&dcols, g);
    let db = dy.chunks(n).map(|row| seq_sum(row)).collect();
    (dx, dw, db)
}

pub(crate) fn seq_sum<T: Element>(xs: &[T]) -> T {
    let mut acc = T::zero();
    for &x in xs {
        acc += x;
    }
    acc
}

/// `x: [N, D_in]`, `w: [D_out, D_in]`, `b: [D_out]` gives `x·wᵀ + b`.
pub fn linear<T: Element>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (xd, wd) = (x.dims(), w.dims());
    if xd.len() != 2 || wd.len() != 2 || xd[1] != wd[1] || b.dims() != [wd[0]] {
        return Err(Error::shape(
            "linear",
            format!("input {xd:?}, weight {wd:?}, bias {:?}", b.dims()),
        ));
    }
    let (n, din, dout) = (xd[0], xd[1], wd[0]);
    let mut out = Vec::with_capacity(n * dout);
    for _ in 0..n {
        out.extend_from_slice(b.data());
    }
    gemm(x.data(), false, w.data(), true, &mut out, n, din, dout, true);
    Tensor::new([n, dout], out)
}

/// Normalizes over the last axis, then applies `gamma`/`beta`.
/// Returns the output with per-row mean and reciprocal std.
pub(crate) fn layer_norm_full<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let d = *x.dims().last().unwrap();
    if gamma.dims() != [d] || beta.dims() != [d] {
        return Err(Error::shape(
            "layer_norm",
            format!("input {:?}, gamma {:?}, beta {:?}", x.dims(), gamma.dims(), beta.dims()),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::Invalid("layer_norm eps must be > 0".into()));
    }
    let rows = x.len() / d;
    let inv_d = T::of(1.0 / d as f64);
    let mut out = vec![T::zero(); x.len()];
    let mut means = Vec::with_capacity(rows);
    let mut rstds = Vec::with_capacity(rows);
    for (row, dst) in x.data().chunks(d).zip(out.chunks_mut(d)) {
        let mean = seq_sum(row) * inv_d;
        let mut var = T::zero();
        for &v in row {
            var += (v - mean) * (v - mean);
        }
        let rstd = T::one() / (var * inv_d + T::of(eps)).sqrt();
        for i in 0..d {
            dst[i] = (row[i] - mean) * rstd * gamma.data()[i] + beta.data()[i];
        }
        means.push(mean);
        rstds.push(rstd);
    }
    Ok((Tensor::new(x.dims(), out)?, means, rstds))
}

pub fn layer_norm<T: Element>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    layer_norm_full(x, gamma, beta, eps).map(|r| r.0)
}

/// Returns (dx, dgamma, dbeta).
pub(crate) fn layer_norm_backward<T: Element>(
    dy: &[T],
    x: &[T],
    gamma: &[T],
    means: &[T],
    rstds: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let d = gamma.len();
    let inv_d = T::of(1.0 / d as f64);
    let mut dx = vec![T::zero(); x.len()];
    let mut dgamma = vec![T::zero(); d];
    let mut dbeta = vec![T::zero(); d];
    let mut xhat = vec![T::zero(); d];
    let mut dxhat = vec![T::zero(); d];
    for (r, ((dyr, xr), dxr)) in dy.chunks(d).zip(x.chunks(d)).zip(dx.chunks_mut(d)).enumerate() {
        let (mean, rstd) = (means[r], rstds[r]);
        let mut sum_dxhat = T::zero();
        let mut sum_dxhat_xhat = T::zero();
        for i in 0..d {
            xhat[i] = (xr[i] - mean) * rstd;
            dxhat[i] = dyr[i] * gamma[i];
            dgamma[i] += dyr[i] * xhat[i];
            dbeta[i] += dyr[i];
            sum_dxhat += dxhat[i];
            sum_dxhat_xhat += dxhat[i] * xhat[i];
        }
        let m1 = sum_dxhat * inv_d;
        let m2 = sum_dxhat_xhat * inv_d;
        for i in 0..d {
            dxr[i] = rstd * (dxhat[i] - m1 - xhat[i] * m2);
        }
    }
    (dx, dgamma, dbeta)
}

fn axis_layout(dims: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= dims.len() {
        return Err(Error::Invalid(format!("axis {axis} out of range for {dims:?}")));
    }
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    Ok((outer, dims[axis], inner))
}

/// Numerically stable softmax along `axis`.
pub fn softmax<T: Element>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, len, inner) = axis_layout(x.dims(), axis)?;
    let mut out = x.data().to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * len + j) * inner + i;
            let mut m = T::neg_infinity();
            for j in 0..len {
                m = m.max(out[idx(j)]);
            }
            let mut z = T::zero();
            for j in 0..len {
                let e = (out[idx(j)] - m).exp();
                out[idx(j)] = e;
                z += e;
            }
            for j in 0..len {
                out[idx(j)] = out[idx(j)] / z;
            }
        }
    }
    Tensor::new(x.dims(), out)
}

pub(crate) fn softmax_backward<T: Element>(dy: &[T], y: &[T], dims: &[usize], axis: usize) -> Vec<T> {
    let (outer, len, inner) = axis_layout(dims, axis).expect("validated in forward");
    let mut dx = vec![T::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * len + j) * inner + i;
            let mut dot = T::zero();
            for j in 0..len {
                dot += dy[idx(j)] * y[idx(j)];
            }
            for j in 0..len {
                dx[idx(j)] = y[idx(j)] * (dy[idx(j)] - dot);
            }
        }
    }
    dx
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Exact GELU, `x·Φ(x)`.
pub fn gelu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| {
        let v = v.as_f64();
        T::of(v * std_normal_cdf(v))
    })
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    std_normal_cdf(x) + x * pdf
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Output of [`attention_full`]: the attended values plus the softmax weights
/// per head, laid out `[heads, Nq, Nk]`.
pub(crate) struct AttentionOut<T> {
    pub out: Tensor<T>,
    pub probs: Vec<T>,
}

fn check_attention<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    bias: Option<&Tensor<T>>,
    mask: Option<&Tensor<T>>,
) -> Result<(usize, usize, usize, usize)> {
    let (qd, kd, vd) = (q.dims(), k.dims(), v.dims());
    if qd.len() != 2 || kd.len() != 2 || vd.len() != 2 || qd[1] != kd[1] || kd[0] != vd[0] {
        return Err(Error::shape("attention", format!("q {qd:?}, k {kd:?}, v {vd:?}")));
    }
    if heads == 0 || qd[1] % heads != 0 || vd[1] % heads != 0 {
        return Err(Error::shape(
            "attention",
            format!("dims {} / {} not divisible by {heads} heads", qd[1], vd[1]),
        ));
    }
    let (nq, nk) = (qd[0], kd[0]);
    if let Some(b) = bias {
        if b.dims() != [heads, nq, nk] {
            return Err(Error::shape("attention", format!("bias {:?} != [{heads},{nq},{nk}]", b.dims())));
        }
    }
    if let Some(m) = mask {
        if m.dims() != [nq, nk] {
            return Err(Error::shape("attention", format!("mask {:?} != [{nq},{nk}]", m.dims())));
        }
    }
    Ok((nq, nk, qd[1], vd[1]))
}

pub(crate) fn attention_full<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    bias: Option<&Tensor<T>>,
    mask: Option<&Tensor<T>>,
) -> Result<AttentionOut<T>> {
    let (nq, nk, d, dv) = check_attention(q, k, v, heads, bias, mask)?;
    let (dh, dvh) = (d / heads, dv / heads);
    let scale = T::of(1.0 / (dh as f64).sqrt());
    let mut probs = vec![T::zero(); heads * nq * nk];
    let mut out = vec![T::zero(); nq * dv];
    let (qs, ks, vs) = (q.data(), k.data(), v.data());
    for h in 0..heads {
        let p = &mut probs[h * nq * nk..(h + 1) * nq * nk];
        for i in 0..nq {
            let row = &mut p[i * nk..(i + 1) * nk];
            let qi = &qs[i * d + h * dh..i * d + (h + 1) * dh];
            for (j, s) in row.iter_mut().enumerate() {
                let kj = &ks[j * d + h * dh..j * d + (h + 1) * dh];
                let mut dot = T::zero();
                for t in 0..dh {
                    dot += qi[t] * kj[t];
                }
                *s = dot * scale;
                if let Some(b) = bias {
                    *s += b.data()[(h * nq + i) * nk + j];
                }
                if let Some(m) = mask {
                    *s += m.data()[i * nk + j];
                }
            }
            let mx = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut z = T::zero();
            for s in row.iter_mut() {
                *s = (*s - mx).exp();
                z += *s;
            }
            for s in row.iter_mut() {
                *s = *s / z;
            }
            let oi = &mut out[i * dv + h * dvh..i * dv + (h + 1) * dvh];
            for (j, &pij) in row.iter().enumerate() {
                let vj = &vs[j * dv + h * dvh..j * dv + (h + 1) * dvh];
                for t in 0..dvh {
                    oi[t] += pij * vj[t];
                }
            }
        }
    }
    Ok(AttentionOut {
        out: Tensor::new([nq, dv], out)?,
        probs,
    })
}

/// Multi-head scaled dot-product attention. `bias` is a per-head additive
/// term `[heads,Nq,Nk]`, `mask` an additive term shared by all heads.
pub fn attention<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    bias: Option<&Tensor<T>>,
    mask: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    attention_full(q, k, v, heads, bias, mask).map(|a| a.out)
}

/// Softmax weights of [`attention`], `[heads, Nq, Nk]`.
pub fn attention_weights<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    heads: usize,
    bias: Option<&Tensor<T>>,
    mask: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let v = Tensor::zeros([k.dims()[0], heads]);
    let a = attention_full(q, k, &v, heads, bias, mask)?;
    Tensor::new([heads, q.dims()[0], k.dims()[0]], a.probs)
}

pub(crate) struct AttentionGrads<T> {
    pub dq: Vec<T>,
    pub dk: Vec<T>,
    pub dv: Vec<T>,
    /// Gradient of the pre-softmax logits, `[heads,Nq,Nk]`; equals the bias gradient.
    pub dlogits: Vec<T>,
}

pub(crate) fn attention_backward<T: Element>(
    dout: &[T],
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
    probs: &[T],
) -> AttentionGrads<T> {
    let (nq, d) = (q.dims()[0], q.dims()[1]);
    let (nk, dv) = (k.dims()[0], v.dims()[1]);
    let (dh, dvh) = (d / heads, dv / heads);
    let scale = T::of(1.0 / (dh as f64).sqrt());
    let (qs, ks, vs) = (q.data(), k.data(), v.data());
    let mut dq = vec![T::zero(); nq * d];
    let mut dk = vec![T::zero(); nk * d];
    let mut dvv = vec![T::zero(); nk * dv];
    let mut dlogits = vec![T::zero(); heads * nq * nk];
    let mut dp = vec![T::zero(); nk];
    for h in 0..heads {
        for i in 0..nq {
            let p = &probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            let doi = &dout[i * dv + h * dvh..i * dv + (h + 1) * dvh];
            let mut dot = T::zero();
            for j in 0..nk {
                let vj = &vs[j * dv + h * dvh..j * dv + (h + 1) * dvh];
                let mut s = T::zero();
                for t in 0..dvh {
                    s += doi[t] * vj[t];
                }
                dp[j] = s;
                dot += s * p[j];
                let dvj = &mut dvv[j * dv + h * dvh..j * dv + (h + 1) * dvh];
                for t in 0..dvh {
                    dvj[t] += p[j] * doi[t];
                }
            }
            let dl = &mut dlogits[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            for j in 0..nk {
                dl[j] = p[j] * (dp[j] - dot);
            }
            for j in 0..nk {
                let ds = dl[j] * scale;
                for t in 0..dh {
                    dq[i * d + h * dh + t] += ds * ks[j * d + h * dh + t];
                    dk[j * d + h * dh + t] += ds * qs[i * d + h * dh + t];
                }
            }
        }
    }
    AttentionGrads {
        dq,
        dk,
        dv: dvv,
        dlogits,
    }
}

/// Sub-pixel rearrangement `[r²·C, H, W] -> [C, r·H, r·W]`.
pub fn pixel_shuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let d = x.dims();
    if d.len() != 3 || r == 0 || d[0] % (r * r) != 0 {
        return Err(Error::shape("pixel_shuffle", format!("{d:?} with factor {r}")));
    }
    let (c, h, w) = (d[0] / (r * r), d[1], d[2]);
    let mut out = vec![T::zero(); x.len()];
    shuffle_indices(c, h, w, r, |src, dst| out[dst] = x.data()[src]);
    Tensor::new([c, h * r, w * r], out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Element>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let d = x.dims();
    if d.len() != 3 || r == 0 || d[1] % r != 0 || d[2] % r != 0 {
        return Err(Error::shape("pixel_unshuffle", format!("{d:?} with factor {r}")));
    }
    let (c, h, w) = (d[0], d[1] / r, d[2] / r);
    let mut out = vec![T::zero(); x.len()];
    shuffle_indices(c, h, w, r, |src, dst| out[src] = x.data()[dst]);
    Tensor::new([c * r * r, h, w], out)
}

/// Calls `f(src, dst)` for every element: `src` indexes `[r²C,H,W]`, `dst` indexes `[C,rH,rW]`.
pub(crate) fn shuffle_indices(c: usize, h: usize, w: usize, r: usize, mut f: impl FnMut(usize, usize)) {
    let (oh, ow) = (h * r, w * r);
    for ch in 0..c {
        for i in 0..r {
            for j in 0..r {
                let src_c = ch * r * r + i * r + j;
                for y in 0..h {
                    for x in 0..w {
                        f((src_c * h + y) * w + x, (ch * oh + y * r + i) * ow + x * r + j);
                    }
                }
            }
        }
    }
}

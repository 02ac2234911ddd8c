//! Reverse-mode differentiation over a recorded forward pass.
//!
//! A [`Tape`] borrows a frozen [`ParamSet`], records every op with its output
//! and computes parameter gradients for one or more scalar objectives. Each
//! objective names its own trainable set: gradients reach only those
//! parameters, while cotangents still flow through frozen ones.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{gemm, Layout};
use super::loss::{loss_grad, loss_value, LossSpec};
use super::math;
use super::params::{Gradients, ParamId, ParamSet, Trainable};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Convolution geometry for square kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone, Copy)]
struct ConvShape {
    batch: usize,
    in_ch: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
    geom: ConvGeom,
}

impl ConvShape {
    fn patch(&self) -> usize {
        self.in_ch * self.geom.kernel * self.geom.kernel
    }

    fn cols(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }
}

enum Op {
    Input,
    Dense { x: Var, w: ParamId, b: ParamId },
    Conv2d { x: Var, w: ParamId, b: ParamId, shape: ConvShape, cols: Vec<f32> },
    Tanh(Var),
    Softmax(Var),
    MaxPool2 { x: Var, argmax: Vec<u32> },
    Reshape(Var),
    Add(Var, Var),
    Loss { pred: Var, spec: LossSpec },
    Sum(Vec<Var>),
}

struct Node {
    value: Tensor,
    op: Op,
    /// Parameters this node depends on.
    deps: Trainable,
    /// Exact loss value for loss and sum nodes.
    scalar: f64,
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} output")))
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    fn push(&mut self, value: Tensor, op: Op, deps: Trainable) -> Var {
        self.nodes.push(Node { value, op, deps, scalar: 0.0 });
        Var(self.nodes.len() - 1)
    }

    fn deps_of(&self, vars: &[Var], extra: &[ParamId]) -> Trainable {
        let mut d = Trainable::new();
        for v in vars {
            d.extend(self.nodes[v.0].deps.iter().copied());
        }
        d.extend(extra.iter().copied());
        d
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a loss or sum node in double precision.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].scalar
    }

    /// Records a constant (no gradient is ever produced for it).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, Trainable::new())
    }

    /// `x · W + b` for a rank-2 `x` and `W` of shape `in × out`.
    pub fn dense(&mut self, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.params.value(w);
        let bv = self.params.value(b);
        if xv.rank() != 2 || wv.rank() != 2 || xv.shape()[1] != wv.shape()[0] || bv.len() != wv.shape()[1] {
            return Err(Error::Dimension(format!(
                "dense: input {:?}, weight {:?}, bias {:?}",
                xv.shape(),
                wv.shape(),
                bv.shape()
            )));
        }
        let (batch, fan_in, fan_out) = (xv.shape()[0], wv.shape()[0], wv.shape()[1]);
        let mut out = Vec::with_capacity(batch * fan_out);
        for _ in 0..batch {
            out.extend_from_slice(bv.data());
        }
        gemm(
            batch,
            fan_in,
            fan_out,
            xv.data(),
            Layout::row_major(fan_in),
            wv.data(),
            Layout::row_major(fan_out),
            1.0,
            &mut out,
        );
        let value = Tensor::new(&[batch, fan_out], out)?;
        check_finite(&value, "dense")?;
        let deps = self.deps_of(&[x], &[w, b]);
        Ok(self.push(value, Op::Dense { x, w, b }, deps))
    }

    /// Cross-correlation of a `batch × C × H × W` input with an `O × C × K × K` kernel.
    pub fn conv2d(&mut self, x: Var, w: ParamId, b: ParamId, stride: usize, pad: usize) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.params.value(w);
        let bv = self.params.value(b);
        if xv.rank() != 4 || wv.rank() != 4 || wv.shape()[1] != xv.shape()[1] || wv.shape()[2] != wv.shape()[3] {
            return Err(Error::Dimension(format!("conv2d: input {:?}, kernel {:?}", xv.shape(), wv.shape())));
        }
        if stride == 0 {
            return Err(Error::Dimension("conv2d: stride must be positive".into()));
        }
        let (batch, in_ch, h, wd) = (xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]);
        let (out_ch, kernel) = (wv.shape()[0], wv.shape()[2]);
        if bv.len() != out_ch {
            return Err(Error::Dimension(format!("conv2d: bias {:?} for {out_ch} channels", bv.shape())));
        }
        if kernel > h + 2 * pad || kernel > wd + 2 * pad {
            return Err(Error::Dimension(format!(
                "conv2d: kernel {kernel} larger than padded input {}×{}",
                h + 2 * pad,
                wd + 2 * pad
            )));
        }
        let shape = ConvShape {
            batch,
            in_ch,
            h,
            w: wd,
            out_h: (h + 2 * pad - kernel) / stride + 1,
            out_w: (wd + 2 * pad - kernel) / stride + 1,
            geom: ConvGeom { kernel, stride, pad },
        };
        let cols = im2col(xv.data(), &shape);
        let n = shape.cols();
        let mut tmp = vec![0.0; out_ch * n];
        gemm(out_ch, shape.patch(), n, wv.data(), Layout::row_major(shape.patch()), &cols, Layout::row_major(n), 0.0, &mut tmp);
        let plane = shape.out_h * shape.out_w;
        let mut out = vec![0.0; batch * out_ch * plane];
        for o in 0..out_ch {
            let bias = bv.data()[o];
            for bi in 0..batch {
                let src = &tmp[o * n + bi * plane..o * n + (bi + 1) * plane];
                let dst = &mut out[(bi * out_ch + o) * plane..(bi * out_ch + o + 1) * plane];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s + bias;
                }
            }
        }
        let value = Tensor::new(&[batch, out_ch, shape.out_h, shape.out_w], out)?;
        check_finite(&value, "conv2d")?;
        let deps = self.deps_of(&[x], &[w, b]);
        Ok(self.push(value, Op::Conv2d { x, w, b, shape, cols }, deps))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| math::tanh(v)).collect();
        let value = Tensor::new(xv.shape(), data)?;
        check_finite(&value, "tanh")?;
        let deps = self.deps_of(&[x], &[]);
        Ok(self.push(value, Op::Tanh(x), deps))
    }

    /// Row-wise softmax of a rank-2 tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::Dimension(format!("softmax expects rank 2, got {:?}", xv.shape())));
        }
        let mut value = xv.clone();
        let k = value.shape()[1];
        for row in value.data_mut().chunks_mut(k) {
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f64;
            for v in row.iter_mut() {
                *v = math::exp(*v - max);
                sum += *v as f64;
            }
            let inv = (1.0 / sum) as f32;
            row.iter_mut().for_each(|v| *v *= inv);
        }
        check_finite(&value, "softmax")?;
        let deps = self.deps_of(&[x], &[]);
        Ok(self.push(value, Op::Softmax(x), deps))
    }

    /// 2×2 max pooling with stride 2 over a rank-4 tensor (odd trailing rows/cols dropped).
    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 4 || xv.shape()[2] < 2 || xv.shape()[3] < 2 {
            return Err(Error::Dimension(format!("max_pool2: input {:?}", xv.shape())));
        }
        let s = xv.shape();
        let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
        let (oh, ow) = (h / 2, w / 2);
        let src = xv.data();
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out.push(src[best]);
                    argmax.push(best as u32);
                }
            }
        }
        let value = Tensor::new(&[s[0], s[1], oh, ow], out)?;
        let deps = self.deps_of(&[x], &[]);
        Ok(self.push(value, Op::MaxPool2 { x, argmax }, deps))
    }

    /// Collapses all non-leading dimensions.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let shape = [xv.rows(), xv.row_len()];
        self.reshape(x, &shape)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let deps = self.deps_of(&[x], &[]);
        Ok(self.push(value, Op::Reshape(x), deps))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Dimension(format!("add: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        let mut value = av.clone();
        value.add_assign(bv);
        check_finite(&value, "add")?;
        let deps = self.deps_of(&[a, b], &[]);
        Ok(self.push(value, Op::Add(a, b), deps))
    }

    /// Sums several tensors in the given order.
    pub fn add_all(&mut self, vars: &[Var]) -> Result<Var> {
        let (&first, rest) = vars.split_first().ok_or_else(|| Error::Dimension("add_all of nothing".into()))?;
        rest.iter().try_fold(first, |acc, &v| self.add(acc, v))
    }

    pub fn loss(&mut self, pred: Var, spec: LossSpec) -> Result<Var> {
        let scalar = loss_value(self.value(pred), &spec)?;
        if !scalar.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let deps = self.deps_of(&[pred], &[]);
        let v = self.push(Tensor::scalar(scalar as f32), Op::Loss { pred, spec }, deps);
        self.nodes[v.0].scalar = scalar;
        Ok(v)
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        if terms.iter().any(|t| self.value(*t).len() != 1) {
            return Err(Error::Dimension("sum expects scalar terms".into()));
        }
        let scalar: f64 = terms.iter().map(|t| self.nodes[t.0].scalar).sum();
        let deps = self.deps_of(terms, &[]);
        let v = self.push(Tensor::scalar(scalar as f32), Op::Sum(terms.to_vec()), deps);
        self.nodes[v.0].scalar = scalar;
        Ok(v)
    }

    /// Gradients of a scalar node with respect to `trainable`.
    pub fn backward(&self, loss: Var, trainable: &Trainable) -> Result<Gradients> {
        self.backward_many(&[(loss, trainable)])
    }

    /// Gradients of several scalar objectives, each restricted to its own trainable set.
    ///
    /// Parameter gradients from objective `o` are accumulated only for
    /// parameters in its set. Cotangents of different objectives share one
    /// sweep wherever their sets agree on every parameter below the node.
    pub fn backward_many(&self, objectives: &[(Var, &Trainable)]) -> Result<Gradients> {
        let n_params = self.params.len();
        for (v, trainable) in objectives {
            if self.value(*v).len() != 1 {
                return Err(Error::Dimension("backward needs a scalar objective".into()));
            }
            if let Some(bad) = trainable.iter().find(|id| id.0 >= n_params) {
                return Err(Error::Lookup(format!("parameter #{}", bad.0)));
            }
        }
        let mut slots: Vec<Vec<(Trainable, Tensor)>> = (0..self.nodes.len()).map(|_| Vec::new()).collect();
        for (v, trainable) in objectives {
            self.push_slot(&mut slots, *v, trainable, Tensor::scalar(1.0));
        }
        let mut grads = Gradients::empty(n_params);
        for idx in (0..self.nodes.len()).rev() {
            let pending = core::mem::take(&mut slots[idx]);
            for (key, g) in pending {
                self.backprop_node(idx, &key, g, &mut slots, &mut grads)?;
            }
        }
        for id in grads.touched().collect::<Vec<_>>() {
            if !grads.get(id).is_some_and(Tensor::all_finite) {
                return Err(Error::NonFinite(format!("gradient of `{}`", self.params.name(id))));
            }
        }
        Ok(grads)
    }

    fn push_slot(&self, slots: &mut [Vec<(Trainable, Tensor)>], v: Var, key: &Trainable, g: Tensor) {
        let deps = &self.nodes[v.0].deps;
        let restricted: Trainable = key.intersection(deps).copied().collect();
        if restricted.is_empty() {
            return;
        }
        let node_slots = &mut slots[v.0];
        if let Some((_, acc)) = node_slots.iter_mut().find(|(k, _)| *k == restricted) {
            acc.add_assign(&g);
        } else {
            node_slots.push((restricted, g));
        }
    }

    fn backprop_node(
        &self,
        idx: usize,
        key: &Trainable,
        g: Tensor,
        slots: &mut [Vec<(Trainable, Tensor)>],
        grads: &mut Gradients,
    ) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Input => {}
            Op::Dense { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.params.value(*w);
                let (batch, fan_in, fan_out) = (xv.shape()[0], wv.shape()[0], wv.shape()[1]);
                if key.contains(w) {
                    let gw = grads.ensure(*w, wv.shape());
                    gemm(
                        fan_in,
                        batch,
                        fan_out,
                        xv.data(),
                        Layout::transposed(fan_in),
                        g.data(),
                        Layout::row_major(fan_out),
                        1.0,
                        gw.data_mut(),
                    );
                }
                if key.contains(b) {
                    let gb = grads.ensure(*b, self.params.value(*b).shape());
                    for row in g.data().chunks(fan_out) {
                        for (acc, v) in gb.data_mut().iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                }
                if key.intersection(&self.nodes[x.0].deps).next().is_some() {
                    let mut gx = vec![0.0; batch * fan_in];
                    gemm(
                        batch,
                        fan_out,
                        fan_in,
                        g.data(),
                        Layout::row_major(fan_out),
                        wv.data(),
                        Layout::transposed(fan_out),
                        0.0,
                        &mut gx,
                    );
                    self.push_slot(slots, *x, key, Tensor::new(xv.shape(), gx)?);
                }
            }
            Op::Conv2d { x, w, b, shape, cols } => {
                let wv = self.params.value(*w);
                let out_ch = wv.shape()[0];
                let plane = shape.out_h * shape.out_w;
                let n = shape.cols();
                // Reorder batch×O×plane into O×(batch·plane) to match the column layout.
                let mut g2 = vec![0.0; out_ch * n];
                for bi in 0..shape.batch {
                    for o in 0..out_ch {
                        let src = &g.data()[(bi * out_ch + o) * plane..(bi * out_ch + o + 1) * plane];
                        g2[o * n + bi * plane..o * n + (bi + 1) * plane].copy_from_slice(src);
                    }
                }
                if key.contains(w) {
                    let gw = grads.ensure(*w, wv.shape());
                    gemm(out_ch, n, shape.patch(), &g2, Layout::row_major(n), cols, Layout::transposed(n), 1.0, gw.data_mut());
                }
                if key.contains(b) {
                    let gb = grads.ensure(*b, self.params.value(*b).shape());
                    for o in 0..out_ch {
                        gb.data_mut()[o] += g2[o * n..(o + 1) * n].iter().sum::<f32>();
                    }
                }
                if key.intersection(&self.nodes[x.0].deps).next().is_some() {
                    let mut gcols = vec![0.0; shape.patch() * n];
                    gemm(
                        shape.patch(),
                        out_ch,
                        n,
                        wv.data(),
                        Layout::transposed(shape.patch()),
                        &g2,
                        Layout::row_major(n),
                        0.0,
                        &mut gcols,
                    );
                    let gx = col2im(&gcols, shape);
                    self.push_slot(slots, *x, key, Tensor::new(self.value(*x).shape(), gx)?);
                }
            }
            Op::Tanh(x) => {
                let mut gx = g;
                for (gi, &y) in gx.data_mut().iter_mut().zip(node.value.data()) {
                    *gi *= 1.0 - y * y;
                }
                self.push_slot(slots, *x, key, gx);
            }
            Op::Softmax(x) => {
                let k = node.value.shape()[1];
                let mut gx = g;
                for (grow, yrow) in gx.data_mut().chunks_mut(k).zip(node.value.data().chunks(k)) {
                    let dot: f32 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for (gi, &y) in grow.iter_mut().zip(yrow) {
                        *gi = y * (*gi - dot);
                    }
                }
                self.push_slot(slots, *x, key, gx);
            }
            Op::MaxPool2 { x, argmax } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                for (&src, &gi) in argmax.iter().zip(g.data()) {
                    gx.data_mut()[src as usize] += gi;
                }
                self.push_slot(slots, *x, key, gx);
            }
            Op::Reshape(x) => {
                let gx = g.reshape(self.value(*x).shape())?;
                self.push_slot(slots, *x, key, gx);
            }
            Op::Add(a, b) => {
                self.push_slot(slots, *a, key, g.clone());
                self.push_slot(slots, *b, key, g);
            }
            Op::Loss { pred, spec } => {
                let gp = loss_grad(self.value(*pred), spec, g.data()[0]);
                self.push_slot(slots, *pred, key, gp);
            }
            Op::Sum(terms) => {
                for t in terms {
                    self.push_slot(slots, *t, key, g.clone());
                }
            }
        }
        Ok(())
    }
}

/// Output columns `lo..hi` whose input column `ox·stride + kx − pad` lies inside `0..w`.
fn valid_cols(s: &ConvShape, kx: usize) -> (usize, usize) {
    let (stride, pad) = (s.geom.stride, s.geom.pad);
    let lo = if pad > kx { (pad - kx).div_ceil(stride) } else { 0 };
    let hi = if s.w + pad > kx { ((s.w - 1 + pad - kx) / stride + 1).min(s.out_w) } else { 0 };
    (lo, hi.max(lo))
}

fn im2col(x: &[f32], s: &ConvShape) -> Vec<f32> {
    let k = s.geom.kernel;
    let plane = s.out_h * s.out_w;
    let n = s.cols();
    let stride = s.geom.stride;
    let mut cols = vec![0.0; s.patch() * n];
    for c in 0..s.in_ch {
        for ky in 0..k {
            for kx in 0..k {
                let r = (c * k + ky) * k + kx;
                let row = &mut cols[r * n..(r + 1) * n];
                let (lo, hi) = valid_cols(s, kx);
                if lo == hi {
                    continue;
                }
                let ix0 = lo * stride + kx - s.geom.pad;
                for bi in 0..s.batch {
                    let src = &x[(bi * s.in_ch + c) * s.h * s.w..(bi * s.in_ch + c + 1) * s.h * s.w];
                    for oy in 0..s.out_h {
                        let iy = (oy * stride + ky) as isize - s.geom.pad as isize;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        let dst = &mut row[bi * plane + oy * s.out_w + lo..bi * plane + oy * s.out_w + hi];
                        let src_row = &src[iy as usize * s.w..(iy as usize + 1) * s.w];
                        if stride == 1 {
                            dst.copy_from_slice(&src_row[ix0..ix0 + (hi - lo)]);
                        } else {
                            for (i, d) in dst.iter_mut().enumerate() {
                                *d = src_row[ix0 + i * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f32], s: &ConvShape) -> Vec<f32> {
    let k = s.geom.kernel;
    let plane = s.out_h * s.out_w;
    let n = s.cols();
    let stride = s.geom.stride;
    let mut x = vec![0.0; s.batch * s.in_ch * s.h * s.w];
    for c in 0..s.in_ch {
        for ky in 0..k {
            for kx in 0..k {
                let r = (c * k + ky) * k + kx;
                let row = &cols[r * n..(r + 1) * n];
                let (lo, hi) = valid_cols(s, kx);
                if lo == hi {
                    continue;
                }
                let ix0 = lo * stride + kx - s.geom.pad;
                for bi in 0..s.batch {
                    let base = (bi * s.in_ch + c) * s.h * s.w;
                    for oy in 0..s.out_h {
                        let iy = (oy * stride + ky) as isize - s.geom.pad as isize;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        let src = &row[bi * plane + oy * s.out_w + lo..bi * plane + oy * s.out_w + hi];
                        let dst = &mut x[base + iy as usize * s.w..base + (iy as usize + 1) * s.w];
                        for (i, &v) in src.iter().enumerate() {
                            dst[ix0 + i * stride] += v;
                        }
                    }
                }
            }
        }
    }
    x
}

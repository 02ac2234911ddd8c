//! Finite-difference gradient oracle.
//!
//! Every network is evaluated twice: once on the tape (f32, analytic
//! gradients) and once by a naive f64 reference written here from scratch.
//! Central differences on the reference give the expected gradients.

use aal_core::numerics::{Activation, Conv2d, Dense, LossSpec, ParamId, ParamSet, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-3;
pub const MAX_REL_ERR: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
enum Layer {
    Dense { fan_in: usize, fan_out: usize, w: ParamId, b: ParamId },
    Conv { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize, w: ParamId, b: ParamId },
    Tanh,
    Softmax,
    Pool,
    Flatten,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Loss {
    CrossEntropy,
    Mse,
}

/// Reference value: shape plus f64 data.
#[derive(Clone, Debug)]
struct Arr {
    shape: Vec<usize>,
    data: Vec<f64>,
}

struct Net {
    /// Main chain; if `side` is set, the first layer of the chain is replaced by
    /// the sum of two dense layers applied to the input.
    layers: Vec<Layer>,
    side: Option<(Layer, Layer)>,
    loss: Loss,
    input: Tensor,
    target: Tensor,
}

#[derive(Debug)]
pub struct CaseReport {
    pub label: String,
    pub worst_rel_err: f64,
    pub params_checked: usize,
    pub coords_skipped: usize,
}

fn param_f64(ps: &ParamSet, id: ParamId, overrides: &[(ParamId, usize, f64)]) -> Vec<f64> {
    let mut v: Vec<f64> = ps.value(id).data().iter().map(|&x| x as f64).collect();
    for &(pid, idx, val) in overrides {
        if pid == id {
            v[idx] = val;
        }
    }
    v
}

fn ref_dense(x: &Arr, w: &[f64], b: &[f64], fan_in: usize, fan_out: usize) -> Arr {
    let batch = x.shape[0];
    let mut out = vec![0.0; batch * fan_out];
    for r in 0..batch {
        for o in 0..fan_out {
            let mut acc = b[o];
            for i in 0..fan_in {
                acc += x.data[r * fan_in + i] * w[i * fan_out + o];
            }
            out[r * fan_out + o] = acc;
        }
    }
    Arr { shape: vec![batch, fan_out], data: out }
}

#[allow(clippy::too_many_arguments)]
fn ref_conv(x: &Arr, w: &[f64], b: &[f64], in_ch: usize, out_ch: usize, k: usize, stride: usize, pad: usize) -> Arr {
    let (batch, h, wd) = (x.shape[0], x.shape[2], x.shape[3]);
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; batch * out_ch * oh * ow];
    for n in 0..batch {
        for o in 0..out_ch {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = b[o];
                    for c in 0..in_ch {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (xx * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                let xi = ((n * in_ch + c) * h + iy as usize) * wd + ix as usize;
                                let wi = ((o * in_ch + c) * k + ky) * k + kx;
                                acc += x.data[xi] * w[wi];
                            }
                        }
                    }
                    out[((n * out_ch + o) * oh + y) * ow + xx] = acc;
                }
            }
        }
    }
    Arr { shape: vec![batch, out_ch, oh, ow], data: out }
}

fn ref_pool(x: &Arr, signature: &mut Vec<usize>) -> Arr {
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::new();
    for p in 0..n * c {
        for y in 0..oh {
            for xx in 0..ow {
                let cands = [(0, 0), (0, 1), (1, 0), (1, 1)];
                let mut best = None::<(usize, f64)>;
                for (dy, dx) in cands {
                    let idx = p * h * w + (2 * y + dy) * w + 2 * xx + dx;
                    if best.is_none_or(|(_, v)| x.data[idx] > v) {
                        best = Some((idx, x.data[idx]));
                    }
                }
                let (idx, v) = best.unwrap();
                signature.push(idx);
                out.push(v);
            }
        }
    }
    Arr { shape: vec![n, c, oh, ow], data: out }
}

fn ref_layer(layer: &Layer, x: Arr, ps: &ParamSet, ov: &[(ParamId, usize, f64)], sig: &mut Vec<usize>) -> Arr {
    match *layer {
        Layer::Dense { fan_in, fan_out, w, b } => {
            ref_dense(&x, &param_f64(ps, w, ov), &param_f64(ps, b, ov), fan_in, fan_out)
        }
        Layer::Conv { in_ch, out_ch, kernel, stride, pad, w, b } => ref_conv(
            &x,
            &param_f64(ps, w, ov),
            &param_f64(ps, b, ov),
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        ),
        Layer::Tanh => Arr { data: x.data.iter().map(|v| v.tanh()).collect(), ..x },
        Layer::Softmax => {
            let k = x.shape[1];
            let mut data = x.data.clone();
            for row in data.chunks_mut(k) {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
                row.iter_mut().for_each(|v| *v = (*v - m).exp() / s);
            }
            Arr { data, ..x }
        }
        Layer::Pool => ref_pool(&x, sig),
        Layer::Flatten => {
            let rows = x.shape[0];
            let cols = x.data.len() / rows;
            Arr { shape: vec![rows, cols], data: x.data }
        }
    }
}

impl Net {
    fn reference_loss(&self, ps: &ParamSet, ov: &[(ParamId, usize, f64)], sig: &mut Vec<usize>) -> f64 {
        let mut x = Arr { shape: self.input.shape().to_vec(), data: self.input.data().iter().map(|&v| v as f64).collect() };
        if let Some((a, b)) = &self.side {
            let ya = ref_layer(a, x.clone(), ps, ov, sig);
            let yb = ref_layer(b, x, ps, ov, sig);
            x = Arr { data: ya.data.iter().zip(&yb.data).map(|(p, q)| p + q).collect(), ..ya };
        }
        for l in &self.layers {
            x = ref_layer(l, x, ps, ov, sig);
        }
        let t: Vec<f64> = self.target.data().iter().map(|&v| v as f64).collect();
        match self.loss {
            Loss::CrossEntropy => {
                let rows = x.shape[0] as f64;
                -x.data.iter().zip(&t).map(|(p, t)| t * p.clamp(1e-7, 1.0 - 1e-7).ln()).sum::<f64>() / rows
            }
            Loss::Mse => x.data.iter().zip(&t).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / t.len() as f64,
        }
    }

    fn tape_gradients(&self, ps: &ParamSet) -> aal_core::numerics::Gradients {
        let mut tape = Tape::new(ps);
        let mut x = tape.input(self.input.clone());
        if let Some((a, b)) = &self.side {
            let ya = tape_layer(&mut tape, a, x);
            let yb = tape_layer(&mut tape, b, x);
            x = tape.add(ya, yb).unwrap();
        }
        for l in &self.layers {
            x = tape_layer(&mut tape, l, x);
        }
        let spec = match self.loss {
            Loss::CrossEntropy => LossSpec::cross_entropy(self.target.clone(), 1.0),
            Loss::Mse => LossSpec::mse(self.target.clone(), 1.0),
        }
        .unwrap();
        let l = tape.loss(x, spec).unwrap();
        tape.backward(l, &ps.all_ids()).unwrap()
    }
}

fn tape_layer(tape: &mut Tape<'_>, layer: &Layer, x: aal_core::numerics::Var) -> aal_core::numerics::Var {
    match *layer {
        Layer::Dense { w, b, .. } => Dense { w, b }.forward(tape, x, Activation::None).unwrap(),
        Layer::Conv { w, b, stride, pad, .. } => Conv2d { w, b, stride, pad }.forward(tape, x).unwrap(),
        Layer::Tanh => tape.tanh(x).unwrap(),
        Layer::Softmax => tape.softmax(x).unwrap(),
        Layer::Pool => tape.max_pool2(x).unwrap(),
        Layer::Flatten => tape.flatten(x).unwrap(),
    }
}

fn dense(ps: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Layer {
    let d = Dense::new(ps, name, fan_in, fan_out, rng).unwrap();
    // Non-zero biases so their gradients are exercised from a generic point.
    for v in ps.value_mut(d.b).data_mut() {
        *v = rng.random_range(-0.3..0.3);
    }
    Layer::Dense { fan_in, fan_out, w: d.w, b: d.b }
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_target(rows: usize, k: usize, loss: Loss, rng: &mut ChaCha8Rng) -> Tensor {
    match loss {
        Loss::CrossEntropy => {
            let ids: Vec<usize> = (0..rows).map(|_| rng.random_range(0..k)).collect();
            Tensor::one_hot(&ids, k).unwrap()
        }
        Loss::Mse => random_tensor(&[rows, k], rng),
    }
}

fn build_case(seed: u64) -> (String, ParamSet, Net) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let batch = rng.random_range(1..=8);
    let template = seed % 5;
    let (label, net) = match template {
        0 => {
            let (i, h, k) = (rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(2..=16));
            let l = vec![dense(&mut ps, "d1", i, h, &mut rng), Layer::Tanh, dense(&mut ps, "d2", h, k, &mut rng), Layer::Softmax];
            let target = random_target(batch, k, Loss::CrossEntropy, &mut rng);
            (format!("dense-tanh-softmax-ce b={batch} {i}->{h}->{k}"), Net { layers: l, side: None, loss: Loss::CrossEntropy, input: random_tensor(&[batch, i], &mut rng), target })
        }
        1 => {
            let (i, k) = (rng.random_range(1..=16), rng.random_range(2..=16));
            let l = vec![dense(&mut ps, "d1", i, k, &mut rng), Layer::Softmax];
            let target = random_target(batch, k, Loss::Mse, &mut rng);
            (format!("dense-softmax-mse b={batch} {i}->{k}"), Net { layers: l, side: None, loss: Loss::Mse, input: random_tensor(&[batch, i], &mut rng), target })
        }
        2 => {
            let c = rng.random_range(1..=3);
            let o = rng.random_range(1..=4);
            let kern = rng.random_range(1..=3);
            let pad = kern / 2;
            let hw = rng.random_range(4..=8);
            let conv = Conv2d::new(&mut ps, "c1", c, o, kern, 1, pad, &mut rng).unwrap();
            for v in ps.value_mut(conv.b).data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
            let side = hw + 2 * pad - kern + 1;
            let flat = o * (side / 2) * (side / 2);
            let k = rng.random_range(2..=6);
            let l = vec![
                Layer::Conv { in_ch: c, out_ch: o, kernel: kern, stride: 1, pad, w: conv.w, b: conv.b },
                Layer::Tanh,
                Layer::Pool,
                Layer::Flatten,
                dense(&mut ps, "d1", flat, k, &mut rng),
                Layer::Softmax,
            ];
            let target = random_target(batch, k, Loss::CrossEntropy, &mut rng);
            (
                format!("conv{kern}x{kern}-tanh-pool-dense-softmax-ce b={batch} {c}x{hw}x{hw}->{o}"),
                Net { layers: l, side: None, loss: Loss::CrossEntropy, input: random_tensor(&[batch, c, hw, hw], &mut rng), target },
            )
        }
        3 => {
            let (i, h, k) = (rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=16));
            let a = dense(&mut ps, "a", i, h, &mut rng);
            let b = dense(&mut ps, "b", i, h, &mut rng);
            let l = vec![Layer::Tanh, dense(&mut ps, "d", h, k, &mut rng)];
            let target = random_target(batch, k, Loss::Mse, &mut rng);
            (format!("add-tanh-dense-mse b={batch} {i}->{h}->{k}"), Net { layers: l, side: Some((a, b)), loss: Loss::Mse, input: random_tensor(&[batch, i], &mut rng), target })
        }
        _ => {
            let c = rng.random_range(1..=3);
            let o = rng.random_range(1..=4);
            let kern = rng.random_range(2..=3);
            let pad = rng.random_range(0..=1);
            let stride = 2;
            let hw = rng.random_range(4..=8);
            let conv = Conv2d::new(&mut ps, "c1", c, o, kern, stride, pad, &mut rng).unwrap();
            let side = (hw + 2 * pad - kern) / stride + 1;
            let k = rng.random_range(1..=5);
            let l = vec![
                Layer::Conv { in_ch: c, out_ch: o, kernel: kern, stride, pad, w: conv.w, b: conv.b },
                Layer::Tanh,
                Layer::Flatten,
                dense(&mut ps, "d1", o * side * side, k, &mut rng),
            ];
            let target = random_target(batch, k, Loss::Mse, &mut rng);
            (
                format!("conv{kern}x{kern}/s{stride}/p{pad}-tanh-dense-mse b={batch} {c}x{hw}x{hw}->{o}"),
                Net { layers: l, side: None, loss: Loss::Mse, input: random_tensor(&[batch, c, hw, hw], &mut rng), target },
            )
        }
    };
    (label, ps, net)
}

/// Runs one randomized case and returns its worst per-parameter relative error.
pub fn check_case(seed: u64) -> CaseReport {
    let (label, ps, net) = build_case(seed);
    let grads = net.tape_gradients(&ps);
    let mut base_sig = Vec::new();
    net.reference_loss(&ps, &[], &mut base_sig);
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for (id, _) in ps.iter() {
        let analytic = grads.dense(id, &ps);
        let base = param_f64(&ps, id, &[]);
        let mut num = vec![0.0; base.len()];
        let mut valid = vec![true; base.len()];
        for e in 0..base.len() {
            let (mut sp, mut sm) = (Vec::new(), Vec::new());
            let lp = net.reference_loss(&ps, &[(id, e, base[e] + FD_STEP)], &mut sp);
            let lm = net.reference_loss(&ps, &[(id, e, base[e] - FD_STEP)], &mut sm);
            if sp != base_sig || sm != base_sig {
                // A pooling argmax flipped: the loss is not differentiable across the step.
                valid[e] = false;
                skipped += 1;
                continue;
            }
            num[e] = (lp - lm) / (2.0 * FD_STEP);
        }
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        for e in 0..base.len() {
            if !valid[e] {
                continue;
            }
            let a = analytic.data()[e] as f64;
            diff += (a - num[e]).powi(2);
            na += a * a;
            nn += num[e] * num[e];
        }
        let scale = na.sqrt().max(nn.sqrt());
        let rel = if scale < 1e-9 { diff.sqrt() } else { diff.sqrt() / scale };
        worst = worst.max(rel);
    }
    CaseReport { label, worst_rel_err: worst, params_checked: ps.len(), coords_skipped: skipped }
}

use alloc::format;

use rand::Rng;

use super::params::{ParamId, ParamSet, Trainable};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Tanh,
    Softmax,
}

/// Fully connected layer `x · W + b` with `W: in × out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    /// Registers `{name}.w` (Glorot uniform) and `{name}.b` (zeros).
    pub fn new<R: Rng>(params: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Self> {
        let w = params.insert_glorot(&format!("{name}.w"), &[fan_in, fan_out], fan_in, fan_out, rng)?;
        let b = params.insert(&format!("{name}.b"), Tensor::zeros(&[fan_out]))?;
        Ok(Self { w, b })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, act: Activation) -> Result<Var> {
        let y = tape.dense(x, self.w, self.b)?;
        match act {
            Activation::None => Ok(y),
            Activation::Tanh => tape.tanh(y),
            Activation::Softmax => tape.softmax(y),
        }
    }

    pub fn ids(&self) -> Trainable {
        [self.w, self.b].into_iter().collect()
    }
}

/// Square-kernel 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let k2 = kernel * kernel;
        let w = params.insert_glorot(&format!("{name}.w"), &[out_ch, in_ch, kernel, kernel], in_ch * k2, out_ch * k2, rng)?;
        let b = params.insert(&format!("{name}.b"), Tensor::zeros(&[out_ch]))?;
        Ok(Self { w, b, stride, pad })
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        tape.conv2d(x, self.w, self.b, self.stride, self.pad)
    }

    pub fn ids(&self) -> Trainable {
        [self.w, self.b].into_iter().collect()
    }
}

/// One-off evaluation of a dense layer plus activation.
pub fn dense_forward(input: &Tensor, params: &ParamSet, layer: &Dense, act: Activation) -> Result<Tensor> {
    let mut tape = Tape::new(params);
    let x = tape.input(input.clone());
    let y = layer.forward(&mut tape, x, act)?;
    Ok(tape.value(y).clone())
}

/// One-off evaluation of a convolution.
pub fn conv2d_forward(input: &Tensor, params: &ParamSet, layer: &Conv2d) -> Result<Tensor> {
    let mut tape = Tape::new(params);
    let x = tape.input(input.clone());
    let y = layer.forward(&mut tape, x)?;
    Ok(tape.value(y).clone())
}

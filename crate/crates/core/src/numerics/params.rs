use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::math;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter within its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Set of parameters a loss is allowed to update.
pub type Trainable = BTreeSet<ParamId>;

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    m: Vec<f32>,
    v: Vec<f32>,
    step: u64,
}

impl Param {
    pub fn adam_step_count(&self) -> u64 {
        self.step
    }
}

/// Named, uniquely identified trainable tensors plus their Adam state.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Param>,
    index: BTreeMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Value(format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.params.len());
        let n = value.len();
        self.params.push(Param { name: name.to_string(), value, m: vec![0.0; n], v: vec![0.0; n], step: 0 });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Glorot-uniform weight with the given fan sizes.
    pub fn insert_glorot<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let limit = math::sqrt(6.0 / (fan_in + fan_out) as f32);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
        self.insert(name, Tensor::new(shape, data)?)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index.get(name).copied().ok_or_else(|| Error::Lookup(name.to_string()))
    }

    pub fn ids(&self, names: &[&str]) -> Result<Trainable> {
        names.iter().map(|n| self.id(n)).collect()
    }

    pub fn all_ids(&self) -> Trainable {
        (0..self.params.len()).map(ParamId).collect()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Clears Adam moments and step counters.
    pub fn reset_optimizer_state(&mut self) {
        for p in &mut self.params {
            p.m.iter_mut().for_each(|x| *x = 0.0);
            p.v.iter_mut().for_each(|x| *x = 0.0);
            p.step = 0;
        }
    }

    /// Copies parameter values (not optimizer state) for the given ids from `other`.
    pub fn copy_values_from(&mut self, other: &ParamSet, ids: &Trainable) {
        for &id in ids {
            self.params[id.0].value = other.params[id.0].value.clone();
        }
    }
}

/// Per-parameter gradients produced by one backward pass. Parameters outside
/// the trainable set hold no gradient at all.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn empty(n_params: usize) -> Self {
        Self { grads: vec![None; n_params] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradient as a dense tensor; exactly zero for parameters that were not trainable.
    pub fn dense(&self, id: ParamId, params: &ParamSet) -> Tensor {
        self.grads[id.0].clone().unwrap_or_else(|| Tensor::zeros(params.value(id).shape()))
    }

    pub fn touched(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.grads.iter().enumerate().filter(|(_, g)| g.is_some()).map(|(i, _)| ParamId(i))
    }

    pub(crate) fn ensure(&mut self, id: ParamId, shape: &[usize]) -> &mut Tensor {
        self.grads[id.0].get_or_insert_with(|| Tensor::zeros(shape))
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Tensor) {
        match &mut self.grads[id.0] {
            Some(t) => t.add_assign(g),
            slot => *slot = Some(g.clone()),
        }
    }

    /// Adds every gradient of `other` into `self`.
    pub fn merge(&mut self, other: Gradients) {
        for (i, g) in other.grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), &g);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Applies one Adam update to every parameter that carries a gradient.
/// Parameters without a gradient (and their moments) are left untouched.
pub fn optimizer_step(params: &mut ParamSet, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    for id in grads.touched() {
        let g = grads.get(id).expect("touched");
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("gradient of `{}`", params.name(id))));
        }
    }
    for id in grads.touched() {
        let g = grads.get(id).expect("touched").data();
        let p = &mut params.params[id.0];
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - math::powi(cfg.beta1, t);
        let bc2 = 1.0 - math::powi(cfg.beta2, t);
        let value = p.value.data_mut();
        for i in 0..value.len() {
            let gi = g[i];
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * gi;
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = p.m[i] / bc1;
            let v_hat = p.v[i] / bc2;
            value[i] -= cfg.lr * m_hat / (math::sqrt(v_hat) + cfg.eps);
        }
        if !p.value.all_finite() {
            return Err(Error::NonFinite(format!("parameter `{}` after update", p.name)));
        }
    }
    Ok(())
}

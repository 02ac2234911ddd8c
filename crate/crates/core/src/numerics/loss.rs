use alloc::format;

use super::math;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probability clamp applied before taking logarithms.
pub const CE_EPSILON: f32 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub target: Tensor,
    pub weight: f32,
}

impl LossSpec {
    pub fn new(kind: LossKind, target: Tensor, weight: f32) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::Value(format!("loss weight {weight} must be finite and >= 0")));
        }
        Ok(Self { kind, target, weight })
    }

    pub fn cross_entropy(target: Tensor, weight: f32) -> Result<Self> {
        Self::new(LossKind::CrossEntropy, target, weight)
    }

    pub fn mse(target: Tensor, weight: f32) -> Result<Self> {
        Self::new(LossKind::MeanSquaredError, target, weight)
    }

    fn check(&self, pred: &Tensor) -> Result<()> {
        if pred.shape() != self.target.shape() {
            return Err(Error::Dimension(format!(
                "prediction {:?} vs target {:?}",
                pred.shape(),
                self.target.shape()
            )));
        }
        Ok(())
    }
}

/// Weighted loss value, accumulated in `f64`.
///
/// Cross-entropy is `-Σ t·ln(clamp(p))` averaged over rows; MSE is the mean over all elements.
pub fn loss_value(pred: &Tensor, spec: &LossSpec) -> Result<f64> {
    spec.check(pred)?;
    let p = pred.data();
    let t = spec.target.data();
    let raw = match spec.kind {
        LossKind::CrossEntropy => {
            let mut acc = 0.0f64;
            for (&pi, &ti) in p.iter().zip(t) {
                if ti != 0.0 {
                    let c = pi.clamp(CE_EPSILON, 1.0 - CE_EPSILON) as f64;
                    acc -= ti as f64 * math::ln(c);
                }
            }
            acc / pred.rows() as f64
        }
        LossKind::MeanSquaredError => {
            let acc: f64 = p
                .iter()
                .zip(t)
                .map(|(&a, &b)| {
                    let d = (a - b) as f64;
                    d * d
                })
                .sum();
            acc / p.len() as f64
        }
    };
    Ok(raw * spec.weight as f64)
}

/// Gradient of [`loss_value`] with respect to `pred`, scaled by `upstream`.
pub(crate) fn loss_grad(pred: &Tensor, spec: &LossSpec, upstream: f32) -> Tensor {
    let p = pred.data();
    let t = spec.target.data();
    let mut g = Tensor::zeros(pred.shape());
    let out = g.data_mut();
    match spec.kind {
        LossKind::CrossEntropy => {
            let scale = spec.weight * upstream / pred.rows() as f32;
            for i in 0..p.len() {
                // The clamp has zero derivative outside [ε, 1-ε].
                if t[i] != 0.0 && p[i] > CE_EPSILON && p[i] < 1.0 - CE_EPSILON {
                    out[i] = -scale * t[i] / p[i];
                }
            }
        }
        LossKind::MeanSquaredError => {
            let scale = 2.0 * spec.weight * upstream / p.len() as f32;
            for i in 0..p.len() {
                out[i] = scale * (p[i] - t[i]);
            }
        }
    }
    g
}

//! Deterministic differentiable-computation core: tensors, layers, losses,
//! selective backpropagation and Adam.

mod layers;
mod linalg;
mod loss;
pub(crate) mod math;
mod params;
mod tape;
mod tensor;

pub use layers::{conv2d_forward, dense_forward, Activation, Conv2d, Dense};
pub use loss::{loss_value, LossKind, LossSpec, CE_EPSILON};
pub use params::{optimizer_step, AdamConfig, Gradients, Param, ParamId, ParamSet, Trainable};
pub use tape::{ConvGeom, Tape, Var};
pub use tensor::Tensor;
